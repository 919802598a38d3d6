"""Loss, metrics, parameter flattening, L-BFGS and gradient checking.

The training loss is the batch-averaged relative l2 error
``||xhat - xgt|| / ||xgt||`` (commonly reported as NMSE). Parameters are
flattened into one real vector with a layout descriptor mapping named
slices back to the parameter bundles; the optimizer only ever sees the
flat vector, so the positivity reparameterization of the penalty weights
is invisible to it.
"""

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .basic import (
    BasicGradients,
    BasicNetParams,
    BasicStageParams,
    basic_forward,
    basic_backward,
)
from .generic import (
    GenericGradients,
    GenericNetParams,
    GenericStageParams,
    GenericSubIterParams,
    generic_forward,
    generic_backward,
)
from .plf import plf_positions

__all__ = [
    "nmse_loss",
    "nmse_grad",
    "psnr",
    "ParamLayout",
    "FlatParams",
    "pack_params",
    "pack_gradients",
    "unpack_params",
    "TrainConfig",
    "LbfgsResult",
    "lbfgs_minimize",
    "make_objective",
    "train_net",
    "finite_diff_check",
    "GradCheckReport",
    "params_to_records",
    "params_from_records",
]


# ---------------------------------------------------------------------------
# loss and metrics


def nmse_loss(xhat, xgt):
    """Relative l2 error, averaged over the batch for stacked inputs."""
    xhat = np.asarray(xhat)
    xgt = np.asarray(xgt)
    if xhat.shape != xgt.shape:
        raise ValueError(f"shape mismatch: {xhat.shape} vs {xgt.shape}")
    if xhat.ndim == 2:
        xhat = xhat[None]
        xgt = xgt[None]
    ratios = []
    for i in range(xhat.shape[0]):
        denom = np.linalg.norm(xgt[i])
        if denom == 0:
            raise ValueError("ground truth has zero norm")
        ratios.append(np.linalg.norm(xhat[i] - xgt[i]) / denom)
    return float(np.mean(ratios))


def nmse_grad(xhat, xgt, batch_size=1):
    """Gradient of the relative-error loss at one sample.

    Returns ``(grad, degenerate)``; at ``xhat == xgt`` the loss is not
    differentiable and a zero gradient with ``degenerate=True`` comes back.
    The gradient carries the ``1/batch_size`` factor of the batch mean.
    """
    xhat = np.asarray(xhat)
    xgt = np.asarray(xgt)
    denom = np.linalg.norm(xgt)
    if denom == 0:
        raise ValueError("ground truth has zero norm")
    residual = xhat - xgt
    rnorm = np.linalg.norm(residual)
    if rnorm == 0:
        return np.zeros_like(xhat), True
    return residual / (denom * rnorm * batch_size), False


def psnr(xhat, xgt):
    """Peak signal-to-noise ratio in dB over magnitude images.

    Peak is ``max |xgt|``; RMSE is taken between the magnitude images.
    Returns ``inf`` for an exact reconstruction.
    """
    xhat = np.asarray(xhat)
    xgt = np.asarray(xgt)
    peak = float(np.max(np.abs(xgt)))
    if peak == 0:
        raise ValueError("ground truth has zero norm")
    rmse = float(np.sqrt(np.mean((np.abs(xhat) - np.abs(xgt)) ** 2)))
    if rmse == 0:
        return float("inf")
    return 20.0 * np.log10(peak / rmse)


# ---------------------------------------------------------------------------
# parameter flattening


@dataclass(frozen=True)
class LayoutEntry:
    name: str
    cls: str
    start: int
    shape: tuple

    @property
    def size(self):
        return int(np.prod(self.shape, dtype=np.int64)) if self.shape else 1

    @property
    def stop(self):
        return self.start + self.size


@dataclass(frozen=True)
class ParamLayout:
    kind: str
    meta: dict
    entries: tuple
    size: int

    def slices(self, cls=None):
        """Named slices, optionally filtered by parameter class."""
        return [e for e in self.entries if cls is None or e.cls == cls]

    @property
    def classes(self):
        seen = []
        for e in self.entries:
            if e.cls not in seen:
                seen.append(e.cls)
        return seen


@dataclass
class FlatParams:
    x: np.ndarray
    layout: ParamLayout


def _walk_basic(p):
    """Yield (name, class, array) in a fixed order; works for gradients too
    because the gradient bundles mirror the parameter field names."""
    for n, st in enumerate(p.stages):
        tag = f"stage{n:02d}"
        yield f"{tag}.filters_h", "H", st.filters_h
        yield f"{tag}.rho_raw", "rho", st.rho_raw
        yield f"{tag}.filters_d", "D", st.filters_d
        yield f"{tag}.plf_values", "q", st.plf_values
        yield f"{tag}.eta", "eta", st.eta
    yield "final.filters_h", "H", p.final_h
    yield "final.rho_raw", "rho", p.final_rho_raw


def _walk_generic(p):
    for n, st in enumerate(p.stages):
        tag = f"stage{n:02d}"
        yield f"{tag}.rho_raw", "rho", st.rho_raw
        for k, sub in enumerate(st.subiters):
            sub_tag = f"{tag}.sub{k}"
            yield f"{sub_tag}.mu1", "mu1", sub.mu1
            yield f"{sub_tag}.mu2", "mu2", sub.mu2
            yield f"{sub_tag}.w1", "w1", sub.w1
            yield f"{sub_tag}.b1", "b1", sub.b1
            yield f"{sub_tag}.w2", "w2", sub.w2
            yield f"{sub_tag}.b2", "b2", sub.b2
            yield f"{sub_tag}.plf_values", "q", sub.plf_values
        yield f"{tag}.eta", "eta", st.eta
    yield "final.rho_raw", "rho", p.final_rho_raw


def _walk(params):
    if isinstance(params, (BasicNetParams, BasicGradients)):
        return _walk_basic(params)
    if isinstance(params, (GenericNetParams, GenericGradients)):
        return _walk_generic(params)
    raise TypeError(f"unsupported parameter bundle {type(params).__name__}")


def _flatten(walker):
    names, values = [], []
    for name, cls, value in walker:
        arr = np.asarray(value, dtype=np.float64)
        names.append((name, cls, arr.shape))
        values.append(arr.ravel())
    return names, np.concatenate(values) if values else np.zeros(0)


def pack_params(params):
    """Flatten a parameter bundle into (vector, layout)."""
    names, x = _flatten(_walk(params))
    entries = []
    offset = 0
    for name, cls, shape in names:
        entries.append(LayoutEntry(name=name, cls=cls, start=offset, shape=shape))
        offset += entries[-1].size
    if isinstance(params, BasicNetParams):
        kind = "basic"
        meta = {
            "n_stages": params.n_stages,
            "n_filters": params.n_filters,
            "filter_size": params.filter_size,
            "n_controls": params.n_controls,
        }
    else:
        kind = "generic"
        meta = {
            "n_stages": params.n_stages,
            "n_subiters": params.n_subiters,
            "n_filters": params.n_filters,
            "filter_size": params.filter_size,
            "fusion_size": params.fusion_size,
            "n_controls": params.n_controls,
            "complex_mode": params.complex_mode,
        }
    layout = ParamLayout(kind=kind, meta=meta, entries=tuple(entries), size=offset)
    return FlatParams(x=x, layout=layout)


def pack_gradients(grads, layout):
    """Flatten a gradient bundle slice-aligned with the parameter vector."""
    _, g = _flatten(_walk(grads))
    if g.size != layout.size:
        raise ValueError(f"gradient size {g.size} does not match layout {layout.size}")
    return g


def unpack_params(flat):
    """Rebuild the parameter bundle from a flat vector and its layout."""
    x = np.asarray(flat.x, dtype=np.float64)
    layout = flat.layout
    if x.size != layout.size:
        raise ValueError(f"vector size {x.size} does not match layout {layout.size}")
    pull = {e.name: x[e.start : e.stop].reshape(e.shape).copy() for e in layout.entries}
    meta = layout.meta
    if layout.kind == "basic":
        stages = [
            BasicStageParams(
                filters_h=pull[f"stage{n:02d}.filters_h"],
                rho_raw=pull[f"stage{n:02d}.rho_raw"],
                filters_d=pull[f"stage{n:02d}.filters_d"],
                plf_values=pull[f"stage{n:02d}.plf_values"],
                eta=pull[f"stage{n:02d}.eta"],
            )
            for n in range(meta["n_stages"])
        ]
        return BasicNetParams(
            stages=stages,
            final_h=pull["final.filters_h"],
            final_rho_raw=pull["final.rho_raw"],
        )
    if layout.kind == "generic":
        stages = []
        for n in range(meta["n_stages"]):
            subiters = [
                GenericSubIterParams(
                    mu1=float(pull[f"stage{n:02d}.sub{k}.mu1"]),
                    mu2=float(pull[f"stage{n:02d}.sub{k}.mu2"]),
                    w1=pull[f"stage{n:02d}.sub{k}.w1"],
                    b1=pull[f"stage{n:02d}.sub{k}.b1"],
                    w2=pull[f"stage{n:02d}.sub{k}.w2"],
                    b2=float(pull[f"stage{n:02d}.sub{k}.b2"]),
                    plf_values=pull[f"stage{n:02d}.sub{k}.plf_values"],
                )
                for k in range(meta["n_subiters"])
            ]
            stages.append(
                GenericStageParams(
                    rho_raw=float(pull[f"stage{n:02d}.rho_raw"]),
                    subiters=subiters,
                    eta=float(pull[f"stage{n:02d}.eta"]),
                )
            )
        return GenericNetParams(
            stages=stages,
            final_rho_raw=float(pull["final.rho_raw"]),
            complex_mode=bool(meta.get("complex_mode", False)),
        )
    raise ValueError(f"unknown layout kind {layout.kind!r}")


# ---------------------------------------------------------------------------
# container records for parameter bundles


def _zero_template(kind, meta):
    if kind == "basic":
        L, w, nc = meta["n_filters"], meta["filter_size"], meta["n_controls"]
        stages = [
            BasicStageParams(
                filters_h=np.zeros((L, w, w)),
                rho_raw=np.zeros(L),
                filters_d=np.zeros((L, w, w)),
                plf_values=np.zeros((L, nc)),
                eta=np.zeros(L),
            )
            for _ in range(meta["n_stages"])
        ]
        return BasicNetParams(
            stages=stages, final_h=np.zeros((L, w, w)), final_rho_raw=np.zeros(L)
        )
    L, w, f, nc = (
        meta["n_filters"],
        meta["filter_size"],
        meta["fusion_size"],
        meta["n_controls"],
    )
    stages = [
        GenericStageParams(
            rho_raw=0.0,
            subiters=[
                GenericSubIterParams(
                    mu1=0.0,
                    mu2=0.0,
                    w1=np.zeros((L, w, w)),
                    b1=np.zeros(L),
                    w2=np.zeros((L, f, f)),
                    b2=0.0,
                    plf_values=np.zeros(nc),
                )
                for _ in range(meta["n_subiters"])
            ],
            eta=0.0,
        )
        for _ in range(meta["n_stages"])
    ]
    return GenericNetParams(
        stages=stages,
        final_rho_raw=0.0,
        complex_mode=bool(meta.get("complex_mode", False)),
    )


def params_to_records(params):
    """Container records for a parameter bundle (kind, dims, flat vector)."""
    flat = pack_params(params)
    records = {"kind": flat.layout.kind.encode("ascii"), "vector": flat.x}
    for key, value in flat.layout.meta.items():
        records[f"meta.{key}"] = np.int64(int(value))
    return records


def params_from_records(records):
    """Rebuild a parameter bundle from container records."""
    kind = records["kind"].decode("ascii")
    meta = {
        key[5:]: int(value) for key, value in records.items() if key.startswith("meta.")
    }
    template = pack_params(_zero_template(kind, meta))
    return unpack_params(FlatParams(x=np.asarray(records["vector"]), layout=template.layout))


# ---------------------------------------------------------------------------
# L-BFGS with a strong Wolfe line search


@dataclass
class TrainConfig:
    max_iters: int = 100
    history: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    gtol: float = 1e-8
    record_every: int = 1

    def __post_init__(self):
        if self.history < 1:
            raise ValueError("history size must be at least 1")
        if not (0.0 < self.c1 < self.c2 < 1.0):
            raise ValueError("need 0 < c1 (decrease) < c2 (curvature) < 1")
        if self.max_iters < 1:
            raise ValueError("need at least one iteration")


@dataclass
class LbfgsResult:
    x: np.ndarray
    value: float
    grad: np.ndarray
    status: str                 # converged | max_iters | line_search_failed
    n_iters: int
    n_evals: int
    history: list = field(default_factory=list)  # (iter, value, grad_norm, seconds)


def _two_loop(grad, memory, gamma):
    q = grad.copy()
    alphas = []
    for s, yv, rho in reversed(memory):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * yv
    r = gamma * q
    for (s, yv, rho), a in zip(memory, reversed(alphas)):
        b = rho * float(yv @ r)
        r += (a - b) * s
    return r


def _wolfe_search(fun, x, f0, g0, direction, c1, c2, alpha0, max_evals=30):
    """Strong Wolfe bracketing line search (bracket then zoom by bisection
    with quadratic interpolation). Returns (alpha, f, g, evals) or None."""
    d = direction
    dg0 = float(g0 @ d)
    if dg0 >= 0:
        return None

    def phi(alpha):
        f, g = fun(x + alpha * d)
        return f, g, float(g @ d)

    evals = 0

    def zoom(lo, f_lo, dg_lo, hi, f_hi):
        nonlocal evals
        for _ in range(max_evals):
            # quadratic interpolation with bisection safeguard
            denom = 2.0 * (f_hi - f_lo - dg_lo * (hi - lo))
            if denom != 0:
                alpha = lo - dg_lo * (hi - lo) ** 2 / denom
            else:
                alpha = 0.5 * (lo + hi)
            width = abs(hi - lo)
            if not (min(lo, hi) + 0.1 * width <= alpha <= max(lo, hi) - 0.1 * width):
                alpha = 0.5 * (lo + hi)
            f, g, dg = phi(alpha)
            evals += 1
            if f > f0 + c1 * alpha * dg0 or f >= f_lo:
                hi, f_hi = alpha, f
            else:
                if abs(dg) <= -c2 * dg0:
                    return alpha, f, g
                if dg * (hi - lo) >= 0:
                    hi, f_hi = lo, f_lo
                lo, f_lo, dg_lo = alpha, f, dg
            if width < 1e-14:
                break
        return None

    alpha_prev, f_prev, dg_prev = 0.0, f0, dg0
    alpha = alpha0
    for _ in range(max_evals):
        f, g, dg = phi(alpha)
        evals += 1
        if f > f0 + c1 * alpha * dg0 or (evals > 1 and f >= f_prev):
            out = zoom(alpha_prev, f_prev, dg_prev, alpha, f)
            return (*out, evals) if out else None
        if abs(dg) <= -c2 * dg0:
            return alpha, f, g, evals
        if dg >= 0:
            out = zoom(alpha, f, dg, alpha_prev, f_prev)
            return (*out, evals) if out else None
        alpha_prev, f_prev, dg_prev = alpha, f, dg
        alpha *= 2.0
    return None


def lbfgs_minimize(objective, x0, cfg=None):
    """Limited-memory BFGS with two-loop recursion.

    ``objective`` maps a flat vector to ``(value, gradient)``. Accepted
    iterates satisfy sufficient decrease and curvature conditions, so the
    recorded values are non-increasing. On a failed line search the best
    iterate so far is returned with status ``line_search_failed``.
    """
    cfg = cfg or TrainConfig()
    x = np.asarray(x0, dtype=np.float64).copy()
    f, g = objective(x)
    n_evals = 1
    memory = []
    gamma = 1.0
    history = [(0, f, float(np.linalg.norm(g)), 0.0)]
    status = "max_iters"
    t0 = time.perf_counter()
    it = 0
    for it in range(1, cfg.max_iters + 1):
        if np.linalg.norm(g) <= cfg.gtol:
            status = "converged"
            it -= 1
            break
        d = -_two_loop(g, memory, gamma)
        if float(g @ d) >= 0:
            memory.clear()
            d = -g
        alpha0 = 1.0 if memory else min(1.0, 1.0 / max(1.0, float(np.linalg.norm(g))))
        hit = _wolfe_search(objective, x, f, g, d, cfg.c1, cfg.c2, alpha0)
        if hit is None:
            status = "line_search_failed"
            it -= 1
            break
        alpha, f_new, g_new, evals = hit
        n_evals += evals
        s = alpha * d
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(yv):
            memory.append((s, yv, 1.0 / sy))
            if len(memory) > cfg.history:
                memory.pop(0)
            gamma = sy / float(yv @ yv)
        x = x + s
        f, g = f_new, g_new
        if it % cfg.record_every == 0:
            history.append((it, f, float(np.linalg.norm(g)), time.perf_counter() - t0))
    else:
        it = cfg.max_iters
    if status == "max_iters" and np.linalg.norm(g) <= cfg.gtol:
        status = "converged"
    return LbfgsResult(
        x=x, value=f, grad=g, status=status, n_iters=it, n_evals=n_evals, history=history
    )


# ---------------------------------------------------------------------------
# objective over a dataset


def _forward_backward(layout):
    if layout.kind == "basic":
        return basic_forward, basic_backward
    return generic_forward, generic_backward


def make_objective(layout, dataset, threads=1):
    """Batch NMSE objective over a dataset as a flat-vector function.

    Per-sample forward/backward passes may run on a thread pool; the
    reduction order is fixed by sample index, so results are deterministic
    for a given thread-count-independent dataset.
    """
    forward, backward = _forward_backward(layout)
    n = len(dataset)

    def per_sample(params, i):
        y, xgt = dataset.sample(i)
        out, tape = forward(y, dataset.mask, params, record=True)
        denom = np.linalg.norm(xgt)
        ratio = np.linalg.norm(out - xgt) / denom
        seed, _ = nmse_grad(out, xgt, batch_size=n)
        grads = backward(tape, y, dataset.mask, params, seed)
        return ratio, pack_gradients(grads, layout)

    def objective(x):
        params = unpack_params(FlatParams(x=x, layout=layout))
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(lambda i: per_sample(params, i), range(n)))
        else:
            results = [per_sample(params, i) for i in range(n)]
        loss = float(np.mean([r for r, _ in results]))
        grad = np.zeros(layout.size)
        for _, gvec in results:
            grad += gvec
        return loss, grad

    return objective


def train_net(params, dataset, cfg=None, csv_path=None, threads=1):
    """Train a parameter bundle on a dataset with L-BFGS.

    Returns ``(trained_params, LbfgsResult)``. With ``csv_path`` a metrics
    log is written with one ``iter,loss,grad_norm,seconds`` row per
    recorded iteration.
    """
    flat = pack_params(params)
    objective = make_objective(flat.layout, dataset, threads=threads)
    result = lbfgs_minimize(objective, flat.x, cfg)
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "loss", "grad_norm", "seconds"])
            for row in result.history:
                writer.writerow([row[0], f"{row[1]:.12e}", f"{row[2]:.12e}", f"{row[3]:.3f}"])
    return unpack_params(FlatParams(x=result.x, layout=flat.layout)), result


# ---------------------------------------------------------------------------
# finite-difference gradient checking


@dataclass
class GradCheckReport:
    classes: dict          # class -> dict(checked, skipped, max_rel_err, worst)
    max_rel_err: float
    h: float
    kink_radius: float

    def passed(self, tol=1e-5):
        return self.max_rel_err < tol

    def lines(self):
        out = []
        for cls, stats in self.classes.items():
            out.append(
                f"{cls:>4}: checked {stats['checked']:3d} skipped {stats['skipped']:2d} "
                f"max rel err {stats['max_rel_err']:.3e} ({stats['worst']})"
            )
        return out


def _activations(tape, layout):
    """All recorded PLF inputs (real and imaginary parts) as one vector."""
    if layout.kind == "basic":
        acts = [a for stage_a in tape.a for a in (stage_a.real, stage_a.imag)]
    else:
        acts = [
            part
            for stage_c1 in tape.c1
            for c1 in stage_c1
            for part in (c1.real, c1.imag)
        ]
    return np.concatenate([a.ravel() for a in acts]) if acts else np.zeros(0)


def _knot_distance(acts, p):
    idx = np.clip(np.searchsorted(p, acts), 1, p.size - 1)
    return np.minimum(np.abs(acts - p[idx - 1]), np.abs(acts - p[idx]))


def finite_diff_check(
    params,
    dataset,
    h=1e-6,
    kink_radius=1e-4,
    max_filter_coords=40,
    corrupt_class=None,
    seed=0,
):
    """Compare analytic gradients against central finite differences.

    Every scalar-class coordinate is checked; filter-type classes are
    subsampled to ``max_filter_coords`` coordinates (seeded). A coordinate
    is skipped when its perturbation moves some PLF input across a kink or
    into the ``kink_radius`` neighborhood of one — there the difference
    quotient straddles a nondifferentiable point and says nothing about
    the analytic gradient.

    The reported error is per parameter class: the largest coordinate
    discrepancy divided by the class gradient's max-norm (floored at the
    finite-difference resolution), so exact-zero gradients are not
    misread as failures when the quotient returns round-off noise.
    ``corrupt_class`` flips the sign of one class's analytic gradient,
    for harness self-tests.
    """
    flat = pack_params(params)
    layout = flat.layout
    forward, backward = _forward_backward(layout)
    n = len(dataset)
    knots = plf_positions(layout.meta["n_controls"])

    def full_eval(x):
        p = unpack_params(FlatParams(x=x, layout=layout))
        loss = 0.0
        grad = np.zeros(layout.size)
        for i in range(n):
            y, xgt = dataset.sample(i)
            out, tape = forward(y, dataset.mask, p, record=True)
            loss += np.linalg.norm(out - xgt) / np.linalg.norm(xgt) / n
            seed_grad, _ = nmse_grad(out, xgt, batch_size=n)
            grad += pack_gradients(backward(tape, y, dataset.mask, p, seed_grad), layout)
        return loss, grad

    def value_and_acts(x):
        p = unpack_params(FlatParams(x=x, layout=layout))
        loss = 0.0
        acts = []
        for i in range(n):
            y, xgt = dataset.sample(i)
            out, tape = forward(y, dataset.mask, p, record=True)
            loss += np.linalg.norm(out - xgt) / np.linalg.norm(xgt) / n
            acts.append(_activations(tape, layout))
        return loss, np.concatenate(acts)

    def unsafe(acts_p, acts_m):
        cells_p = np.searchsorted(knots, acts_p, side="right")
        cells_m = np.searchsorted(knots, acts_m, side="right")
        if np.any(cells_p != cells_m):
            return True
        moved = acts_p != acts_m
        if not np.any(moved):
            return False
        near = (_knot_distance(acts_p, knots) < kink_radius) | (
            _knot_distance(acts_m, knots) < kink_radius
        )
        return bool(np.any(moved & near))

    x0 = flat.x
    _, analytic = full_eval(x0)
    if corrupt_class is not None:
        for e in layout.slices(corrupt_class):
            analytic[e.start : e.stop] *= -1.0

    filter_classes = {"H", "D", "w1", "w2"}
    rng = np.random.default_rng(seed)
    report = {}
    overall = 0.0
    for cls in layout.classes:
        coords = np.concatenate(
            [np.arange(e.start, e.stop) for e in layout.slices(cls)]
        )
        if cls in filter_classes and coords.size > max_filter_coords:
            coords = np.sort(rng.choice(coords, size=max_filter_coords, replace=False))
        checked = skipped = 0
        pairs = []
        for i in coords:
            step = h * max(1.0, abs(x0[i]))
            xp = x0.copy()
            xm = x0.copy()
            xp[i] += step
            xm[i] -= step
            fp, acts_p = value_and_acts(xp)
            fm, acts_m = value_and_acts(xm)
            if unsafe(acts_p, acts_m):
                skipped += 1
                continue
            numeric = (fp - fm) / (2.0 * step)
            pairs.append((i, analytic[i], numeric))
            checked += 1
        max_err = 0.0
        worst = "-"
        if pairs:
            scale = max(max(abs(a), abs(nu)) for _, a, nu in pairs)
            denom = max(scale, 1e-7)
            for i, a, nu in pairs:
                err = abs(a - nu) / denom
                if err > max_err:
                    max_err = err
                    worst = f"coord {i}"
        report[cls] = {
            "checked": checked,
            "skipped": skipped,
            "max_rel_err": max_err,
            "worst": worst,
        }
        overall = max(overall, max_err)
    return GradCheckReport(
        classes=report, max_rel_err=overall, h=h, kink_radius=kink_radius
    )
