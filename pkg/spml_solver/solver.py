"""Sparsity-promoting metric learning: the convex program for the density phi.

    minimize    J(phi) = S(phi) + alpha (lam ||phi||_1 + (1 - lam) ||phi||_2)
    subject to  D(phi) >= c,  phi >= 0

with quadrature-weighted norms ||phi||_1 = sum phi_k q_k and ||phi||_2 = (sum phi_k^2 q_k)^(1/2).
J is convex and homogeneous of degree one, so every minimizer has D(phi) = c and the solver works on
the slice {D(phi) = c, phi >= 0}. Scaling c scales the minimizer by the same factor.
"""
import collections
import dataclasses
import logging
import time

import humanize
import numpy as np
from scipy import optimize

from common import grid_quadrature, json_utils
from common.grid_quadrature import Density, Grid, check_same_grid

DENSITY_VERSION = 'spml-phi/1'
SUPPORT_THRESHOLD = 1e-10
POLISH_EVERY = 50
METHODS = ('projected_gradient', 'water_filling')


class Error(Exception):
    pass


class DomainError(Error):
    pass


class SolverNonconvergenceError(Error):
    """Iteration budget exhausted; best_solution is the best iterate found."""

    def __init__(self, message, best_solution):
        super().__init__(message)
        self.best_solution = best_solution


class DensityFormatError(json_utils.ArtifactFormatError):
    pass


SPMLParams = collections.namedtuple(
    'SPMLParams',
    ['alpha', 'lam', 'c', 'kkt_tol', 'constraint_tol', 'max_iter', 'rel_tol', 'method'],
    defaults=[1.0, 0.0, 1.0, 1e-6, 1e-8, 20000, 1e-10, 'projected_gradient'])


def check_params(params):
    if not params.alpha >= 0:
        raise ValueError('alpha must be nonnegative, got %r' % params.alpha)
    if not 0 <= params.lam < 1:
        raise ValueError('lambda must lie in [0, 1), got %r' % params.lam)
    if not params.c > 0:
        raise ValueError('Constraint level c must be positive, got %r' % params.c)
    if not (params.kkt_tol > 0 and params.constraint_tol > 0 and params.rel_tol > 0):
        raise ValueError('Solver tolerances must be positive')
    if params.max_iter < 1:
        raise ValueError('max_iter must be at least 1, got %r' % params.max_iter)
    if params.method not in METHODS:
        raise ValueError('Unknown method %r, expected one of %s' % (params.method, METHODS))


@dataclasses.dataclass(frozen=True)
class SPMLSolution:
    phi: Density
    objective: float
    constraint_value: float
    kkt: float
    iterations: int
    active_set_size: int
    method: str

    def diagnostics(self):
        return {'objective': self.objective, 'D': self.constraint_value, 'kkt': self.kkt,
                'iters': self.iterations, 'active_set_size': self.active_set_size,
                'method': self.method}


def _density_values(phi, pair_sums):
    if isinstance(phi, Density):
        check_same_grid(pair_sums, phi)
        return phi.values
    values = np.asarray(phi, dtype=float)
    if values.shape != (pair_sums.grid.n_points,):
        raise grid_quadrature.GridMismatchError('phi has shape %s, grid has %d points' % (
            values.shape, pair_sums.grid.n_points))
    if np.any(values < 0):
        raise DomainError('phi must be nonnegative, min value %g' % values.min())
    return values


def _objective(values, pair_sums, params):
    q = pair_sums.grid.quad_weights
    return float(np.sum((pair_sums.s + params.alpha * params.lam) * values * q)
                 + params.alpha * (1 - params.lam) * np.sqrt(np.sum(values ** 2 * q)))


def _gradient(values, pair_sums, params):
    q = pair_sums.grid.quad_weights
    grad = (pair_sums.s + params.alpha * params.lam) * q
    norm = np.sqrt(np.sum(values ** 2 * q))
    if norm > 0:
        grad = grad + params.alpha * (1 - params.lam) * q * values / norm
    return grad


def objective(phi, pair_sums, params):
    """J(phi) for a Density or nonnegative array on the pair-sum grid."""
    return _objective(_density_values(phi, pair_sums), pair_sums, params)


def constraint_value(phi, pair_sums):
    return float(np.sum(pair_sums.d * _density_values(phi, pair_sums) * pair_sums.grid.quad_weights))


def kkt_residual(phi, pair_sums, params):
    """Largest violation of the optimality conditions of the program.

    Stationarity grad J - mu grad D - eta = 0 is checked with mu fitted by least squares on the
    support (phi_k > 1e-10 max phi) and eta = grad J - mu grad D off the support, which must be
    nonnegative. Both are reported relative to max |grad J|. Primal feasibility is reported as
    |D(phi) - c| / c.

    Raises:
        DomainError if phi is identically zero (the L2 term is not differentiable there).
    """
    values = _density_values(phi, pair_sums)
    peak = values.max()
    if peak <= 0:
        raise DomainError('KKT residual is undefined at phi == 0')
    grad = _gradient(values, pair_sums, params)
    a = pair_sums.d * pair_sums.grid.quad_weights
    support = values > SUPPORT_THRESHOLD * peak
    a_support = a[support]
    denominator = np.sum(a_support ** 2)
    mu = float(np.sum(grad[support] * a_support) / denominator) if denominator > 0 else 0.0
    scale = max(float(np.max(np.abs(grad))), np.finfo(float).tiny)
    eta = grad - mu * a
    stationarity = float(np.max(np.abs(eta[support]))) / scale
    dual = float(np.max(np.maximum(-eta[~support], 0.0), initial=0.0)) / scale
    multiplier = max(-mu, 0.0) * float(np.max(a)) / scale
    feasibility = abs(float(np.sum(a * values)) - params.c) / params.c
    return max(stationarity, dual, multiplier, feasibility)


def lp_degenerate_solution(pair_sums, c=1.0):
    """Minimizer for alpha = 0: all mass at the point minimizing s_k / d_k (lowest index on ties)."""
    d = pair_sums.d
    positive = d > 0
    if not np.any(positive):
        raise DomainError('Dissimilar sum is identically zero')
    ratio = np.full(len(d), np.inf)
    ratio[positive] = pair_sums.s[positive] / d[positive]
    k = int(np.argmin(ratio))
    values = np.zeros(len(d))
    values[k] = c / (d[k] * pair_sums.grid.quad_weights[k])
    return Density(pair_sums.grid, values, alpha=0.0, lam=None)


def _water_filling_values(pair_sums, params, mask=None):
    """phi proportional to max(mu d - s - alpha lam, 0), with mu fixed by the L2 norm equation."""
    s = pair_sums.s
    d = pair_sums.d if mask is None else np.where(mask, pair_sums.d, 0.0)
    q = pair_sums.grid.quad_weights
    positive = d > 0
    if not np.any(positive):
        raise DomainError('Dissimilar sum vanishes on the candidate support')
    shift = s + params.alpha * params.lam
    target = params.alpha * (1 - params.lam)

    def excess(mu):
        return np.maximum(mu * d - shift, 0.0)

    def norm_gap(mu):
        return float(np.sqrt(np.sum(excess(mu) ** 2 * q))) - target

    mu_low = float(np.min(shift[positive] / d[positive]))
    mu_high = 2 * mu_low + 1.0
    while norm_gap(mu_high) < 0:
        mu_high *= 2
    mu = optimize.brentq(norm_gap, mu_low, mu_high, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                         maxiter=500)
    psi = excess(mu)
    return psi * (params.c / float(np.sum(d * psi * q)))


def water_filling_solution(pair_sums, params):
    """Closed-form minimizer from the stationarity conditions; lp_degenerate_solution when alpha = 0."""
    check_params(params)
    if params.alpha == 0:
        return lp_degenerate_solution(pair_sums, params.c)
    return Density(pair_sums.grid, _water_filling_values(pair_sums, params), alpha=params.alpha,
                   lam=params.lam)


def project_onto_slice(y, a, c):
    """Euclidean projection of y onto {x >= 0, a . x = c} for a >= 0 with some a_k > 0.

    The solution is x = max(y - tau a, 0); tau is found from the breakpoints y_k / a_k taken in
    descending order, as for the unit simplex.
    """
    x = np.maximum(y, 0.0)
    positive = a > 0
    a_pos = a[positive]
    y_pos = y[positive]
    ratios = y_pos / a_pos
    order = np.argsort(-ratios, kind='stable')
    cum_ay = np.cumsum(a_pos[order] * y_pos[order])
    cum_aa = np.cumsum(a_pos[order] ** 2)
    taus = (cum_ay - c) / cum_aa
    valid = np.nonzero(ratios[order] > taus)[0]
    tau = taus[valid[-1]] if len(valid) else taus[-1]
    x[positive] = np.maximum(y_pos - tau * a_pos, 0.0)
    return x


def _polish(values, pair_sums, params):
    """Closed form restricted to the support of values, or None if it cannot be formed."""
    support = values > SUPPORT_THRESHOLD * values.max()
    if params.alpha == 0:
        d = np.where(support, pair_sums.d, 0.0)
        if not np.any(d > 0):
            return None
        ratio = np.full(len(d), np.inf)
        ratio[d > 0] = pair_sums.s[d > 0] / d[d > 0]
        k = int(np.argmin(ratio))
        candidate = np.zeros(len(d))
        candidate[k] = params.c / (d[k] * pair_sums.grid.quad_weights[k])
        return candidate
    try:
        return _water_filling_values(pair_sums, params, mask=support)
    except DomainError:
        return None


def _solution(values, pair_sums, params, iterations, method):
    phi = Density(pair_sums.grid, values, alpha=params.alpha, lam=params.lam)
    return SPMLSolution(
        phi=phi,
        objective=_objective(values, pair_sums, params),
        constraint_value=constraint_value(values, pair_sums),
        kkt=kkt_residual(values, pair_sums, params),
        iterations=iterations,
        active_set_size=int(np.count_nonzero(values > SUPPORT_THRESHOLD)),
        method=method)


def _certified(solution, params):
    return (solution.kkt <= params.kkt_tol
            and abs(solution.constraint_value - params.c) <= params.constraint_tol * params.c)


def _projected_gradient(pair_sums, params):
    """Accelerated projected gradient with backtracking, adaptive restart and support polishing."""
    a = pair_sums.d * pair_sums.grid.quad_weights
    x = project_onto_slice(np.full(len(a), params.c / np.sum(a)), a, params.c)
    f_x = _objective(x, pair_sums, params)
    y = x.copy()
    t = 1.0
    lipschitz = max(np.linalg.norm(_gradient(x, pair_sums, params)) / np.linalg.norm(x), 1e-12)
    best = (f_x, x)
    for iteration in range(1, params.max_iter + 1):
        f_y = _objective(y, pair_sums, params)
        g_y = _gradient(y, pair_sums, params)
        lipschitz *= 0.5
        while True:
            x_new = project_onto_slice(y - g_y / lipschitz, a, params.c)
            step = x_new - y
            f_new = _objective(x_new, pair_sums, params)
            bound = f_y + g_y @ step + 0.5 * lipschitz * (step @ step)
            if f_new <= bound + 1e-15 * abs(f_y) or lipschitz > 1e300:
                break
            lipschitz *= 2
        if f_new < best[0]:
            best = (f_new, x_new)
        if (y - x_new) @ (x_new - x) > 0:
            t = 1.0
            y = x_new.copy()
        else:
            t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
            y = x_new + ((t - 1) / t_new) * (x_new - x)
            t = t_new
        relative_change = abs(f_new - f_x) / max(abs(f_x), np.finfo(float).tiny)
        x, f_x = x_new, f_new

        if iteration % POLISH_EVERY == 0 or relative_change < params.rel_tol:
            candidate = _polish(x, pair_sums, params)
            if candidate is not None:
                solution = _solution(candidate, pair_sums, params, iteration, params.method)
                if _certified(solution, params):
                    return solution
            if relative_change < params.rel_tol:
                solution = _solution(x, pair_sums, params, iteration, params.method)
                if _certified(solution, params):
                    return solution
        if iteration % 1000 == 0:
            logging.debug('Iteration %d: J=%.12g L=%g', iteration, f_x, lipschitz)
    best_solution = _solution(best[1], pair_sums, params, params.max_iter, params.method)
    raise SolverNonconvergenceError(
        'No certified solution after %s iterations (best KKT residual %g)' % (
            humanize.intcomma(params.max_iter), best_solution.kkt), best_solution)


def solve(pair_sums, params=SPMLParams()):
    """Minimize J on {D(phi) >= c, phi >= 0}.

    Returns:
        SPMLSolution whose KKT residual is at most params.kkt_tol and whose constraint value is c
        to within params.constraint_tol (relative).
    Raises:
        SolverNonconvergenceError with the best iterate attached if no certified solution is
        reached within params.max_iter iterations.
    """
    check_params(params)
    if not np.any(pair_sums.d > 0):
        raise DomainError('Dissimilar sum is identically zero')
    start = time.monotonic()
    if params.method == 'water_filling':
        solution = _solution(water_filling_solution(pair_sums, params).values, pair_sums, params,
                             0, params.method)
        if not _certified(solution, params):
            raise SolverNonconvergenceError(
                'Closed-form solution failed certification (KKT residual %g)' % solution.kkt,
                solution)
    else:
        solution = _projected_gradient(pair_sums, params)
    logging.info('Solved alpha=%g lambda=%g: J=%.10g, %d active points, KKT %.2g, %s iterations '
                 'in %s', params.alpha, params.lam, solution.objective, solution.active_set_size,
                 solution.kkt, humanize.intcomma(solution.iterations),
                 humanize.naturaldelta(time.monotonic() - start))
    return solution


def density_to_json(solution):
    phi = solution.phi
    return {
        'version': DENSITY_VERSION,
        'grid': phi.grid.to_json(),
        'phi': phi.values,
        'phi_max_normalized': phi.max_normalized(),
        'alpha': phi.alpha,
        'lambda': phi.lam,
        'diagnostics': solution.diagnostics(),
    }


def save_density(path, solution):
    json_utils.dump_json(path, density_to_json(solution))


def load_density(path):
    """Density with its alpha and lambda from a file written by save_density."""
    data = json_utils.load_json(path, DENSITY_VERSION, error_class=DensityFormatError)
    try:
        return Density(Grid.from_json(data['grid']), data['phi'], alpha=data['alpha'],
                       lam=data['lambda'])
    except (KeyError, TypeError, ValueError, grid_quadrature.Error) as err:
        raise DensityFormatError('Malformed density file %s: %r' % (path, err)) from err
