"""Similar and dissimilar pair sums of a labeled library.

For a density phi the sum of squared phi-distances over all similar pairs is S(phi) = sum_k s_k phi_k q_k,
and over all dissimilar pairs D(phi) = sum_k d_k phi_k q_k. The per-point coefficients are built
from label means and centered sums of squares, which avoids the O(N^2) pair loop:

  within label l:          sum_{i<j} (u_i - u_j)^2 = n_l SS_l
  between labels l and m:  sum_{i,j} (u_i - u_j)^2 = n_m SS_l + n_l SS_m + n_l n_m (mean_l - mean_m)^2
"""
import dataclasses
import logging

import numpy as np

from common.grid_quadrature import Grid, check_same_grid


class Error(Exception):
    pass


class PairSumsError(Error):
    """The library cannot produce a feasible constraint (fewer than two labels, or d == 0)."""


@dataclasses.dataclass(frozen=True, eq=False)
class PairSums:
    grid: Grid
    s: np.ndarray
    d: np.ndarray
    n_similar: int
    n_dissimilar: int

    def __post_init__(self):
        for name in ('s', 'd'):
            values = np.array(getattr(self, name), dtype=float)
            if values.shape != (self.grid.n_points,):
                raise PairSumsError('%s has shape %s, grid has %d points' % (
                    name, values.shape, self.grid.n_points))
            if np.any(values < 0) or not np.all(np.isfinite(values)):
                raise PairSumsError('%s must be finite and nonnegative' % name)
            values.setflags(write=False)
            object.__setattr__(self, name, values)

    def similar_sum(self, phi):
        check_same_grid(self, phi)
        return float(np.sum(self.s * phi.values * self.grid.quad_weights))

    def dissimilar_sum(self, phi):
        check_same_grid(self, phi)
        return float(np.sum(self.d * phi.values * self.grid.quad_weights))


def pair_counts(label_counts):
    """(|S|, |D|) for the given per-label counts."""
    counts = [int(n) for n in label_counts]
    n_similar = sum(n * (n - 1) // 2 for n in counts)
    n_dissimilar = sum(counts[i] * counts[j]
                       for i in range(len(counts)) for j in range(i + 1, len(counts)))
    return n_similar, n_dissimilar


def pair_sums_from_arrays(grid, rows, labels):
    """PairSums of rows (one observed state per row) grouped by labels.

    Raises:
        PairSumsError if fewer than two labels are present or every dissimilar pair coincides.
    """
    rows = np.asarray(rows, dtype=float)
    labels = np.asarray(labels)
    if rows.ndim != 2 or rows.shape[0] != len(labels):
        raise PairSumsError('Need one label per row, got %s rows and %d labels' % (
            rows.shape, len(labels)))
    present = sorted(set(labels.tolist()))
    if len(present) < 2:
        raise PairSumsError('Library has %d distinct label(s); at least 2 are needed'
                            % len(present))
    n_values = rows.shape[1]
    groups = []
    for label in present:
        members = rows[labels == label]
        mean = members.mean(axis=0)
        groups.append((len(members), mean, np.sum((members - mean) ** 2, axis=0)))

    s = np.zeros(n_values)
    d = np.zeros(n_values)
    for index, (n_l, mean_l, ss_l) in enumerate(groups):
        s += n_l * ss_l
        for n_m, mean_m, ss_m in groups[index + 1:]:
            d += n_m * ss_l + n_l * ss_m + n_l * n_m * (mean_l - mean_m) ** 2
    if n_values != grid.n_points:
        # stacked components (u then v) share the grid point weights
        s = s.reshape(-1, grid.n_points).sum(axis=0)
        d = d.reshape(-1, grid.n_points).sum(axis=0)
    if not np.any(d > 0):
        raise PairSumsError('Dissimilar sum is identically zero; the constraint is infeasible')
    n_similar, n_dissimilar = pair_counts([group[0] for group in groups])
    return PairSums(grid, s, d, n_similar, n_dissimilar)


def assemble_pair_sums(library, use_u_only=True):
    """PairSums of a LabeledLibrary.

    Args:
        library: library.generation.LabeledLibrary.
        use_u_only: bool, measure only u. When False, FitzHugh-Nagumo v differences are added at
            the same grid points.
    Returns:
        PairSums.
    """
    grid = library.system.grid
    if use_u_only or library.system.n_components == 1:
        rows = library.u_matrix()
    else:
        rows = np.vstack([state.state_vector() for state in library.states])
    pair_sums = pair_sums_from_arrays(grid, rows, library.labels)
    logging.info('Assembled pair sums over %d similar and %d dissimilar pairs',
                 pair_sums.n_similar, pair_sums.n_dissimilar)
    return pair_sums

