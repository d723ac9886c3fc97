"""Integration engines for <f, psi_{a,r,t}> over the atom's support.

Both engines parametrize the support by the generator box: a point u of the
box is sent to x = t + S_r(A u) and the region's membership (or level
function) is evaluated there, so region inequalities are never transformed.
The Jacobian a^(1+alpha) and the normalization a^-(1+alpha)/2 combine into
the single weight a^((1+alpha)/2).

LineFamilyQuadrature integrates one generator factor exactly along lines
between boundary crossings and places the lines adaptively; AdaptiveQuadrature
refines a quadtree and serves as the reference for it.
"""

import math
import threading

import numpy as np

from core.generators import project_out_moments
from utils.errors import ConfigurationError, ResolutionError
from utils.logger import Logger

logger = Logger().get_logger('quadrature')

BISECTION_STEPS = 60
CELL_BISECTION_STEPS = 24
FAMILY_LINES = 32
FAMILY_SAMPLES = 32
LINE_RTOL = 1e-5
LINE_ATOL = 1e-10
MAX_LINE_LEVELS = 8
MIN_ESTIMATE_DEPTH = 4

_clip_warned = set()
_clip_lock = threading.Lock()


class AtomMap:
    """u -> t + S_r(A u) with cached scale factors."""

    def __init__(self, params):
        self.a, self.f2 = params.scale.factors
        self.t1, self.t2 = params.t
        self.shear = params.shear
        self.weight = params.a ** ((1.0 + params.alpha) / 2.0)

    def __call__(self, u1, u2):
        y = self.f2 * np.asarray(u2, dtype=float)
        return self.t1 + self.a * np.asarray(u1, dtype=float) + self.shear.offset(y), self.t2 + y

    def bounding_box(self, box):
        """(x1lo, x1hi, x2lo, x2hi) of the image of the generator box."""
        (lo1, hi1), (lo2, hi2) = box
        plo, phi = self.shear.offset_range(self.f2 * lo2, self.f2 * hi2)
        return (self.t1 + self.a * lo1 + plo, self.t1 + self.a * hi1 + phi,
                self.t2 + self.f2 * lo2, self.t2 + self.f2 * hi2)

    def max_shear_slope(self, box):
        """Exact max of |d offset / dy| over the box's y range."""
        (_, _), (lo2, hi2) = box
        lo, hi = self.f2 * lo2, self.f2 * hi2
        slope = np.polynomial.Polynomial((0.0,) + self.shear.r).deriv()
        candidates = [lo, hi]
        for root in slope.deriv().roots():
            if abs(root.imag) < 1e-12 and lo < root.real < hi:
                candidates.append(root.real)
        return float(np.max(np.abs(slope(np.asarray(candidates)))))

    def half_extents(self, hu1, hu2, slope):
        """Half widths on the image of a box cell with half widths (hu1, hu2)."""
        return self.a * hu1 + slope * self.f2 * hu2, self.f2 * hu2


def _cell_weights(antiderivative, lo, hi, n):
    edges = np.linspace(lo, hi, n + 1)
    return 0.5 * (edges[1:] + edges[:-1]), np.diff(antiderivative(edges))


def quadratic_weights(primitives, x0, x1):
    """Product weights at (x0, mid, x1) integrating w * (quadratic interpolant of F) exactly.

    ``primitives`` returns the antiderivative chain A1, A2, A3 of w; moments are
    taken about the panel centre so that short panels keep their precision.
    """
    half = 0.5 * (x1 - x0)
    a1, a2, a3 = primitives(x0)
    b1, b2, b3 = primitives(x1)
    m0 = b1 - a1
    m1 = (half * (b1 + a1) - (b2 - a2)) / half
    m2 = (half * half * m0 - 2.0 * half * (b2 + a2) + 2.0 * (b3 - a3)) / (half * half)
    return 0.5 * (m2 - m1), m0 - m2, 0.5 * (m2 + m1)


def check_raster_resolution(sig, amap, box):
    """Raise ResolutionError when pixels are wider than the atom; warn when the atom leaves the raster."""
    size = sig.pixel_size
    if size is None:
        return
    if amap.a < size[0]:
        max_j = int(math.floor(math.log2(1.0 / size[0])))
        raise ResolutionError(
            f"raster pixel width {size[0]:.3g} exceeds atom width {amap.a:.3g}; "
            f"finest feasible scale index is j={max_j}", max_scale_index=max_j)
    if not sig.contains_box(amap.bounding_box(box)):
        with _clip_lock:
            first = id(sig) not in _clip_warned
            _clip_warned.add(id(sig))
        message = f"Atom support leaves the raster domain of {sig!r}; integrating the clipped part"
        if first:
            logger.warning(message)
        else:
            logger.debug(message)


def _sampled_product_rule(sig, amap, g, min_lines1, min_lines2, chunk=256):
    """Product midpoint rule with exact cell masses, spacing at most half a pixel on the image."""
    (lo1, hi1), (lo2, hi2) = g.box
    px = min(sig.pixel_size) if sig.pixel_size is not None else float('inf')
    slope = max(1.0, amap.max_shear_slope(g.box))
    n1 = max(min_lines1, int(math.ceil(2.0 * amap.a * (hi1 - lo1) / px)) if math.isfinite(px) else 0)
    n2 = max(min_lines2, int(math.ceil(2.0 * amap.f2 * slope * (hi2 - lo2) / px)) if math.isfinite(px) else 0)
    nodes1, w1 = _cell_weights(g.psi_antiderivative, lo1, hi1, n1)
    nodes2, w2 = _cell_weights(g.phi_antiderivative, lo2, hi2, n2)

    total = 0.0
    for start in range(0, n2, chunk):
        u2 = nodes2[start:start + chunk]
        x1, x2 = amap(nodes1[None, :], u2[:, None])
        total += float(w2[start:start + chunk] @ (sig.membership_xy(x1, x2) @ w1))
    return total


class LineFamilyQuadrature:
    """Exact line integrals of one generator factor, adaptive product rule across lines.

    Rows run along u1 and use the wavelet antiderivative; columns run along
    u2 and use the window antiderivative. Across the family, panels start at
    q lines per generator unit and are halved until a quadratic product rule
    and its two-panel refinement agree. Column weights are finally projected
    so that polynomials of degree < M in u1 are integrated to exactly zero.
    """

    def __init__(self, generator, q=16, line_samples=64, rtol=LINE_RTOL, max_levels=MAX_LINE_LEVELS):
        if int(q) < 4:
            raise ConfigurationError(f"oversampling q must be at least 4, got {q}")
        if int(line_samples) < 4:
            raise ConfigurationError(f"line_samples must be at least 4, got {line_samples}")
        self.logger = Logger().get_logger('quadrature.lines')
        self.g = generator
        self.q = int(q)
        self.rtol = float(rtol)
        self.max_levels = int(max_levels)
        (lo1, hi1), (lo2, hi2) = generator.box

        self.n_columns = int(round(self.q * generator.psi_scale))
        self.n_rows = int(round(self.q * generator.phi_scale))
        self.row_samples = np.linspace(lo1, hi1, int(line_samples))
        self.column_samples = np.linspace(lo2, hi2, int(line_samples))
        self.row_primitive = generator.psi_antiderivative(self.row_samples)
        self.column_primitive = generator.phi_antiderivative(self.column_samples)
        self.scale = generator.psi_l1_norm * generator.phi_total

        self.logger.debug(f"Line quadrature: {self.n_rows} rows, {self.n_columns} columns to start, "
                          f"{line_samples} samples per line")

    def _level_on(self, sig, amap, rows):
        if rows:
            return lambda fixed, var: sig.level_xy(*amap(var, fixed))
        return lambda fixed, var: sig.level_xy(*amap(fixed, var))

    @staticmethod
    def _bisect(level_on, fixed, left, right, left_inside, steps=BISECTION_STEPS):
        for _ in range(steps):
            mid = 0.5 * (left + right)
            same = (level_on(fixed, mid) >= 0.0) == left_inside
            left = np.where(same, mid, left)
            right = np.where(same, right, mid)
        return 0.5 * (left + right)

    def _crossing_lines(self, level_on, fixed, samples):
        inside = level_on(fixed[:, None], samples[None, :]) >= 0.0
        return int(np.count_nonzero(np.any(inside[:, 1:] != inside[:, :-1], axis=1)))

    def choose_family(self, sig, amap):
        """True for rows. The family whose lines cross the boundary more often wins; ties go to rows."""
        (lo1, hi1), (lo2, hi2) = self.g.box
        along1 = np.linspace(lo1, hi1, FAMILY_SAMPLES)
        along2 = np.linspace(lo2, hi2, FAMILY_SAMPLES)
        fixed1 = lo1 + (np.arange(FAMILY_LINES) + 0.5) * (hi1 - lo1) / FAMILY_LINES
        fixed2 = lo2 + (np.arange(FAMILY_LINES) + 0.5) * (hi2 - lo2) / FAMILY_LINES
        rows = self._crossing_lines(self._level_on(sig, amap, True), fixed2, along1)
        columns = self._crossing_lines(self._level_on(sig, amap, False), fixed1, along2)
        return rows >= columns

    def line_integrals(self, sig, amap, rows, fixed):
        """Integral of the line's generator factor over the region part of each line at ``fixed``.

        A line that dips across the boundary between two samples is caught at
        local minima of |level| and corrected by the chord between its two roots.
        """
        if rows:
            samples, primitive, antiderivative = self.row_samples, self.row_primitive, self.g.psi_antiderivative
        else:
            samples, primitive, antiderivative = self.column_samples, self.column_primitive, self.g.phi_antiderivative
        fixed = np.asarray(fixed, dtype=float)
        level_on = self._level_on(sig, amap, rows)

        level = level_on(fixed[:, None], samples[None, :])
        inside = level >= 0.0
        change = inside[:, 1:] != inside[:, :-1]
        steps = np.diff(primitive)
        contributions = np.where(inside[:, :-1], steps[None, :], 0.0)

        crossed = change.any(axis=1)
        if crossed.any():
            line, cell = np.nonzero(change)
            left_inside = inside[line, cell]
            root = self._bisect(level_on, fixed[line], samples[cell], samples[cell + 1], left_inside)
            at_root = antiderivative(root)
            contributions[line, cell] = np.where(left_inside, at_root - primitive[cell],
                                                 primitive[cell + 1] - at_root)
        integrals = contributions.sum(axis=1)

        magnitude = np.abs(level)
        flat = (inside[:, :-2] == inside[:, 1:-1]) & (inside[:, 1:-1] == inside[:, 2:])
        dip = flat & (magnitude[:, 1:-1] <= magnitude[:, :-2]) & (magnitude[:, 1:-1] < magnitude[:, 2:])
        if dip.any():
            line, k = np.nonzero(dip)
            k = k + 1
            l0, l1, l2 = level[line, k - 1], level[line, k], level[line, k + 1]
            curvature = l0 - 2.0 * l1 + l2
            offset = np.divide(0.5 * (l0 - l2), curvature, out=np.zeros_like(l1), where=curvature != 0.0)
            step = samples[1] - samples[0]
            vertex = samples[k] + np.clip(offset, -1.0, 1.0) * step
            side = inside[line, k]
            flipped = (level_on(fixed[line], vertex) >= 0.0) != side
            if flipped.any():
                line, k, vertex, side = line[flipped], k[flipped], vertex[flipped], side[flipped]
                first = self._bisect(level_on, fixed[line], samples[k - 1], vertex, side)
                second = self._bisect(level_on, fixed[line], vertex, samples[k + 1], ~side)
                chord = antiderivative(second) - antiderivative(first)
                np.add.at(integrals, line, np.where(side, -chord, chord))
                crossed[line] = True
        return integrals, crossed

    def _panels(self, sig, amap, rows):
        """Adaptive composite rule across the family: (nodes, weights, values, crossed)."""
        g = self.g
        (lo, hi), primitives, count = ((g.box[1], g.phi_primitives, self.n_rows) if rows
                                       else (g.box[0], g.psi_primitives, self.n_columns))
        edges = np.linspace(lo, hi, count + 1)
        x0, x1 = edges[:-1], edges[1:]
        xm = 0.5 * (x0 + x1)
        values, crossed = self.line_integrals(sig, amap, rows, np.concatenate([edges, xm]))
        any_crossed = bool(crossed.any())
        f0, f1, fm = values[:count], values[1:count + 1], values[count + 1:]

        nodes, weights, samples = [], [], []
        budget = None
        capped = 0
        for level in range(self.max_levels + 1):
            n = x0.size
            xl = 0.5 * (x0 + xm)
            xr = 0.5 * (xm + x1)
            quarter, crossed = self.line_integrals(sig, amap, rows, np.concatenate([xl, xr]))
            any_crossed = any_crossed or bool(crossed.any())
            fl, fr = quarter[:n], quarter[n:]

            c0, cm, c1 = quadratic_weights(primitives, x0, x1)
            a0, am, a1 = quadratic_weights(primitives, x0, xm)
            b0, bm, b1 = quadratic_weights(primitives, xm, x1)
            coarse = c0 * f0 + cm * fm + c1 * f1
            fine = a0 * f0 + am * fl + (a1 + b0) * fm + bm * fr + b1 * f1
            if budget is None:
                budget = max(self.rtol * abs(float(fine.sum())), LINE_ATOL * self.scale)

            accept = np.abs(fine - coarse) <= budget * (x1 - x0) / (hi - lo)
            if level == self.max_levels:
                capped = int(np.count_nonzero(~accept))
                accept[:] = True
            if accept.any():
                nodes.extend([x0[accept], xl[accept], xm[accept], xr[accept], x1[accept]])
                weights.extend([a0[accept], am[accept], (a1 + b0)[accept], bm[accept], b1[accept]])
                samples.extend([f0[accept], fl[accept], fm[accept], fr[accept], f1[accept]])

            keep = ~accept
            if not keep.any():
                break
            x0, xm, x1 = (np.concatenate([x0[keep], xm[keep]]), np.concatenate([xl[keep], xr[keep]]),
                          np.concatenate([xm[keep], x1[keep]]))
            f0, fm, f1 = (np.concatenate([f0[keep], fm[keep]]), np.concatenate([fl[keep], fr[keep]]),
                          np.concatenate([fm[keep], f1[keep]]))

        if capped:
            self.logger.debug(f"Line refinement stopped at level {self.max_levels} on {capped} panels")
        return np.concatenate(nodes), np.concatenate(weights), np.concatenate(samples), any_crossed

    def integrate(self, sig, params):
        amap = AtomMap(params)
        g = self.g
        if sig.is_constant:
            return amap.weight * sig.inside_value * g.psi_total * g.phi_total
        if not sig.has_level:
            check_raster_resolution(sig, amap, g.box)
            return amap.weight * _sampled_product_rule(sig, amap, g, self.n_columns, self.n_rows)

        rows = self.choose_family(sig, amap)
        nodes, weights, values, crossed = self._panels(sig, amap, rows)
        if not crossed:
            return 0.0
        if not rows:
            (lo1, hi1), _ = g.box
            weights = project_out_moments(weights, np.ones_like(weights), nodes, g.vanishing_moments, lo1, hi1)
        return amap.weight * sig.inside_value * float(weights @ values)


class AdaptiveQuadrature:
    """Level-by-level quadtree over the generator box.

    A cell is integrated exactly by separability only when the signal is
    provably constant on its image. Other cells compare a 2-row and a 4-row
    estimate (exact boundary crossings for analytic regions, sub-sampled
    products for rasters) and are split until the two agree to ``tol``, the
    cell's mass bound drops below ``tol`` or ``max_depth`` is reached.
    """

    def __init__(self, generator, tol=1e-8, max_depth=14):
        if not tol > 0:
            raise ConfigurationError(f"adaptive tolerance must be positive, got {tol}")
        self.logger = Logger().get_logger('quadrature.adaptive')
        self.g = generator
        self.tol = float(tol)
        self.max_depth = int(max_depth)
        self.sup_density = generator.psi1.sup_norm * float(np.max(generator.phi1(np.linspace(
            generator.phi1.lo, generator.phi1.hi, 257))))

    def _masses(self, cells):
        g = self.g
        return ((g.psi_antiderivative(cells[:, 1]) - g.psi_antiderivative(cells[:, 0]))
                * (g.phi_antiderivative(cells[:, 3]) - g.phi_antiderivative(cells[:, 2])))

    def _certify(self, sig, amap, cells, slope):
        """Cells on whose image the signal is provably constant, and the value there."""
        c1 = 0.5 * (cells[:, 0] + cells[:, 1])
        c2 = 0.5 * (cells[:, 2] + cells[:, 3])
        h1, h2 = amap.half_extents(0.5 * (cells[:, 1] - cells[:, 0]), 0.5 * (cells[:, 3] - cells[:, 2]), slope)
        x1, x2 = amap(c1, c2)
        uniform = sig.constant_on(x1, x2, h1, h2)
        if sig.has_level:
            values = np.where(sig.level_xy(x1, x2) >= 0.0, 1.0, 0.0)
        else:
            values = sig.membership_xy(x1, x2)
        return uniform, values

    def _rows(self, cells, m):
        g = self.g
        e2 = cells[:, 2, None] + (cells[:, 3] - cells[:, 2])[:, None] * np.linspace(0.0, 1.0, m + 1)
        return 0.5 * (e2[:, 1:] + e2[:, :-1]), np.diff(g.phi_antiderivative(e2), axis=1)

    def _crossing_estimate(self, sig, amap, cells, m):
        """Sub-row estimate with exact crossings; also flags rows crossed twice and rows crossed at all."""
        g = self.g
        u2, w2 = self._rows(cells, m)
        left = np.broadcast_to(cells[:, 0, None], u2.shape)
        right = np.broadcast_to(cells[:, 1, None], u2.shape)

        def level_on(u1, row):
            return sig.level_xy(*amap(u1, row))

        in_left = level_on(left, u2) >= 0.0
        in_right = level_on(right, u2) >= 0.0
        in_mid = level_on(0.5 * (left + right), u2) >= 0.0
        twice = (in_left == in_right) & (in_mid != in_left)

        lo_psi = g.psi_antiderivative(left)
        hi_psi = g.psi_antiderivative(right)
        pieces = np.where(in_left, hi_psi - lo_psi, 0.0)
        split = in_left != in_right
        if split.any():
            row = u2[split]
            a, b = left[split], right[split]
            starts_inside = in_left[split]
            for _ in range(CELL_BISECTION_STEPS):
                mid = 0.5 * (a + b)
                same = (level_on(mid, row) >= 0.0) == starts_inside
                a = np.where(same, mid, a)
                b = np.where(same, b, mid)
            la, lb = level_on(a, row), level_on(b, row)
            denom = la - lb
            root = np.where(denom != 0.0, a + la * (b - a) / np.where(denom != 0.0, denom, 1.0), 0.5 * (a + b))
            at_root = g.psi_antiderivative(root)
            pieces[split] = np.where(starts_inside, at_root - lo_psi[split], hi_psi[split] - at_root)
        return np.sum(pieces * w2, axis=1), twice.any(axis=1), (split | twice).any(axis=1)

    def _sampled_estimate(self, sig, amap, cells, m):
        g = self.g
        frac = np.linspace(0.0, 1.0, m + 1)
        e1 = cells[:, 0, None] + (cells[:, 1] - cells[:, 0])[:, None] * frac
        e2 = cells[:, 2, None] + (cells[:, 3] - cells[:, 2])[:, None] * frac
        w1 = np.diff(g.psi_antiderivative(e1), axis=1)
        w2 = np.diff(g.phi_antiderivative(e2), axis=1)
        m1 = 0.5 * (e1[:, 1:] + e1[:, :-1])
        m2 = 0.5 * (e2[:, 1:] + e2[:, :-1])
        values = sig.membership_xy(*amap(m1[:, :, None], m2[:, None, :]))
        mixed = np.any(values.reshape(len(cells), -1) != values.reshape(len(cells), -1)[:, :1], axis=1)
        return np.einsum('nij,ni,nj->n', values, w1, w2), np.zeros(len(cells), bool), mixed

    def _estimates(self, sig, amap, cells):
        estimate = self._crossing_estimate if sig.has_level else self._sampled_estimate
        coarse, twice_coarse, _ = estimate(sig, amap, cells, 2)
        fine, twice_fine, mixed = estimate(sig, amap, cells, 4)
        return coarse, fine, twice_coarse | twice_fine, mixed

    @staticmethod
    def _split(cells):
        c1 = 0.5 * (cells[:, 0] + cells[:, 1])
        c2 = 0.5 * (cells[:, 2] + cells[:, 3])
        quads = [
            np.stack([cells[:, 0], c1, cells[:, 2], c2], axis=1),
            np.stack([c1, cells[:, 1], cells[:, 2], c2], axis=1),
            np.stack([cells[:, 0], c1, c2, cells[:, 3]], axis=1),
            np.stack([c1, cells[:, 1], c2, cells[:, 3]], axis=1),
        ]
        return np.concatenate(quads, axis=0)

    def integrate(self, sig, params):
        amap = AtomMap(params)
        g = self.g
        if sig.is_constant:
            return amap.weight * sig.inside_value * g.psi_total * g.phi_total
        check_raster_resolution(sig, amap, g.box)

        (lo1, hi1), (lo2, hi2) = g.box
        cells = np.array([[lo1, hi1, lo2, hi2]])
        slope = amap.max_shear_slope(g.box)
        total = 0.0
        seen_values = set()
        mixed_seen = False
        capped = 0
        bound_scale = self.sup_density * sig.sup_norm

        for depth in range(self.max_depth + 1):
            uniform, values = self._certify(sig, amap, cells, slope)
            if uniform.any():
                total += float(np.sum(values[uniform] * self._masses(cells[uniform])))
                seen_values.update(np.unique(values[uniform]).tolist())
            cells, values = cells[~uniform], values[~uniform]
            if len(cells) == 0:
                break

            area = (cells[:, 1] - cells[:, 0]) * (cells[:, 3] - cells[:, 2])
            small = bound_scale * area <= self.tol
            if depth >= MIN_ESTIMATE_DEPTH or small.any() or depth == self.max_depth:
                coarse, fine, twice, mixed = self._estimates(sig, amap, cells)
                accept = small | ((np.abs(fine - coarse) < self.tol) & ~twice & (depth >= MIN_ESTIMATE_DEPTH))
                if depth == self.max_depth:
                    capped = int(np.count_nonzero(~accept))
                    accept[:] = True
                if accept.any():
                    total += float(np.sum(fine[accept]))
                    mixed_seen = mixed_seen or bool(mixed[accept].any())
                    seen_values.update(np.unique(values[accept & ~mixed]).tolist())
                cells = cells[~accept]
                if len(cells) == 0:
                    break
            cells = self._split(cells)

        if capped:
            self.logger.warning(f"Adaptive quadrature hit max_depth={self.max_depth} on {capped} cells")
        if not mixed_seen and len(seen_values) <= 1:
            return 0.0
        scale = sig.inside_value if sig.has_level else 1.0
        return amap.weight * scale * total
