"""
Post-hoc stability certification and trajectory diagnostics.

A port-Hamiltonian model x' = (J - R) dH + G u has a globally asymptotically
stable equilibrium x* when H is convex with a positive definite Hessian at
its minimum x*, J is skew-symmetric and R is positive definite. With R only
semi-definite every solution stays bounded. Convexity of the sPHNN
Hamiltonian and skewness of J hold by construction; they are sampled here as
regression checks next to the genuinely numerical Hessian test at x*.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from sphs.calculators.ode import IntegrationConfig, integrate, signal_eval
from sphs.core.autodiff import hessian
from sphs.core.errors import DataError, DivergenceError, UnsupportedOperationError
from sphs.models import phs
from sphs.utils.linalg import cholesky_succeeds, min_eigenvalue, skew_residual

logger = logging.getLogger(__name__)

VERDICTS = ("certified_global_asymptotic", "certified_stable_bounded", "not_certified")

HESSIAN_TOLERANCE = 1e-8
SKEW_TOLERANCE = 1e-10
STRICT_R_TOLERANCE = 1e-10
SEMI_R_TOLERANCE = -1e-12
CONVEXITY_SLACK = 1e-10
EQUILIBRIUM_GRADIENT_TOLERANCE = 1e-8
DEFAULT_SAMPLES = 1000
DEFAULT_BOX_HALFWIDTH = 3.0

PROBE_INTEGRATION = IntegrationConfig(method="tsit5_adaptive", rtol=1e-8, atol=1e-10)


@dataclass
class StabilityReport:
    """
    Evidence for or against stability of the equilibrium x*

    Violation counters and sample counts are cumulative; eigenvalue and
    residual fields hold the worst value seen. The verdict is recomputed from
    the evidence, so merging reports can keep or revoke a certification but
    never strengthen it.
    """

    kind: str
    x_star: list
    hessian_min_eigenvalue: float
    hessian_pd_at_xstar: bool
    equilibrium_gradient_norm: float
    skewness_residual: float
    r_min_eigenvalue: float
    r_mode: str
    convexity_violations: int
    convexity_checks: int
    samples: int
    verdict: str = "not_certified"
    notes: list = field(default_factory=list)

    def __post_init__(self):
        self.verdict = self._decide()

    def _decide(self):
        skew_ok = self.skewness_residual <= SKEW_TOLERANCE
        if not skew_ok or self.r_min_eigenvalue < SEMI_R_TOLERANCE:
            return "not_certified"
        if self.kind == "bphnn":
            # positive, radially unbounded Hamiltonian
            return "certified_stable_bounded"
        convex_min = (
            self.hessian_pd_at_xstar
            and self.convexity_violations == 0
            and self.equilibrium_gradient_norm <= EQUILIBRIUM_GRADIENT_TOLERANCE
        )
        if not convex_min:
            return "not_certified"
        if self.r_mode == "strict" and self.r_min_eigenvalue > STRICT_R_TOLERANCE:
            return "certified_global_asymptotic"
        return "certified_stable_bounded"

    @property
    def certified(self):
        return self.verdict != "not_certified"

    def merge(self, other):
        """Combined evidence of two reports on the same model"""
        notes = self.notes + [note for note in other.notes if note not in self.notes]
        return StabilityReport(
            kind=self.kind,
            x_star=self.x_star,
            hessian_min_eigenvalue=min(self.hessian_min_eigenvalue, other.hessian_min_eigenvalue),
            hessian_pd_at_xstar=self.hessian_pd_at_xstar and other.hessian_pd_at_xstar,
            equilibrium_gradient_norm=max(self.equilibrium_gradient_norm, other.equilibrium_gradient_norm),
            skewness_residual=max(self.skewness_residual, other.skewness_residual),
            r_min_eigenvalue=min(self.r_min_eigenvalue, other.r_min_eigenvalue),
            r_mode=self.r_mode,
            convexity_violations=self.convexity_violations + other.convexity_violations,
            convexity_checks=self.convexity_checks + other.convexity_checks,
            samples=self.samples + other.samples,
            notes=notes,
        )

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data.pop("verdict", None)
        return cls(**data)


def _r_mode(model):
    head = model.heads["R"]
    if head.mode == "zero":
        return "zero"
    return model.spec.r_definiteness


def verify_stability(model, sample_count=DEFAULT_SAMPLES, seed=0, box_halfwidth=DEFAULT_BOX_HALFWIDTH):
    """
    Check the stability conditions of a port-Hamiltonian model

    (a) Hessian of H at x* positive definite (minimum eigenvalue above 1e-8,
        confirmed by a Cholesky factorization), with dH(x*) = 0;
    (b) J skew-symmetric at sampled states;
    (c) R positive (semi-)definite at sampled states;
    (d) midpoint convexity of H on sampled pairs.

    Samples are uniform in the box x* ± box_halfwidth.

    Args:
        model: PhsModel with a Hamiltonian
        sample_count: Number of sampled states (and of convexity pairs)
        seed: Sampler seed
        box_halfwidth: Half-width of the sampling box

    Returns:
        StabilityReport

    Raises:
        UnsupportedOperationError: For NODE models
    """
    if not model.has_hamiltonian:
        raise UnsupportedOperationError(f"Stability verification is not defined for model kind '{model.kind}'")
    n = model.state_dim
    x_star = model.equilibrium()
    notes = []

    H = hessian(model.hamiltonian_expr, x_star, model.params)
    hess_min = min_eigenvalue(H)
    hess_pd = hess_min > HESSIAN_TOLERANCE and cholesky_succeeds(H, HESSIAN_TOLERANCE)
    grad_norm = float(np.max(np.abs(phs.grad_hamiltonian(model, x_star))))

    rng = np.random.default_rng(seed)
    X = x_star + rng.uniform(-box_halfwidth, box_halfwidth, size=(sample_count, n))
    J, R, _ = phs.structure_matrices_batch(model, X)
    skew = max((skew_residual(j) for j in J), default=0.0)
    r_min = min((min_eigenvalue(r) for r in R), default=0.0)

    A = x_star + rng.uniform(-box_halfwidth, box_halfwidth, size=(sample_count, n))
    B = x_star + rng.uniform(-box_halfwidth, box_halfwidth, size=(sample_count, n))
    h_a = phs.hamiltonian_batch(model, A)
    h_b = phs.hamiltonian_batch(model, B)
    h_mid = phs.hamiltonian_batch(model, 0.5 * (A + B))
    chord = 0.5 * (h_a + h_b)
    slack = CONVEXITY_SLACK * np.maximum(1.0, np.abs(chord))
    violations = int(np.sum(h_mid > chord + slack))

    if model.kind in ("sphnn", "sphnn_lm"):
        notes.append("convexity of H guaranteed by construction (input-convex network); sampled as regression check")
        if model.spec.epsilon > 0:
            notes.append("Hessian at x* positive definite by construction (epsilon > 0); checked numerically")
        else:
            notes.append("Hessian at x* checked numerically (epsilon = 0)")
    else:
        notes.append("convexity of H sampled only")
    if model.heads["J"].mode != "zero":
        notes.append("skew-symmetry of J guaranteed by construction; sampled")
    if _r_mode(model) == "strict" and model.heads["R"].mode == "constant":
        notes.append("R = L L^T with positive diagonal of L: positive definite by construction")

    report = StabilityReport(
        kind=model.kind,
        x_star=[float(v) for v in x_star],
        hessian_min_eigenvalue=hess_min,
        hessian_pd_at_xstar=bool(hess_pd),
        equilibrium_gradient_norm=grad_norm,
        skewness_residual=skew,
        r_min_eigenvalue=r_min,
        r_mode=_r_mode(model),
        convexity_violations=violations,
        convexity_checks=sample_count,
        samples=sample_count,
        notes=notes,
    )
    logger.info(
        "Stability: %s (Hessian min eig %.3e, R min eig %.3e, %d convexity violations)",
        report.verdict,
        hess_min,
        r_min,
        violations,
    )
    return report


@dataclass
class EnergyAudit:
    """Energy balance and monotonicity along a trajectory"""

    samples: int
    max_balance_residual: float
    unforced: bool
    energy_increases: int
    max_energy_increase: float
    initial_energy: float
    final_energy: float


def energy_audit(model, traj, u=None, tolerance=1e-7):
    """
    Check dH/dt = -dH^T R dH + s(x, u) at every sample, and H monotonicity when unforced

    Args:
        model: PhsModel with a Hamiltonian
        traj: Trajectory in model coordinates
        u: InputSignal or None
        tolerance: Allowed growth of H between consecutive samples

    Returns:
        EnergyAudit
    """
    if not model.has_hamiltonian:
        raise UnsupportedOperationError(f"Energy audit is not defined for model kind '{model.kind}'")
    inputs = np.array([signal_eval(u, t) for t in traj.times]) if u is not None else None
    energy, rate, dissipation, supply = phs.power_terms(model, traj.states, inputs)
    residual = np.abs(rate - (dissipation + supply))
    unforced = inputs is None or not np.any(inputs)
    steps = np.diff(energy)
    increases = int(np.sum(steps > tolerance)) if unforced else 0
    return EnergyAudit(
        samples=len(traj),
        max_balance_residual=float(np.max(residual)),
        unforced=bool(unforced),
        energy_increases=increases,
        max_energy_increase=float(np.max(steps, initial=0.0)),
        initial_energy=float(energy[0]),
        final_energy=float(energy[-1]),
    )


@dataclass
class ProbeResult:
    """Outcome of integrating the unforced model from far-away initial states"""

    passed: bool
    finite: bool
    starts: int
    radius: float
    horizon: float
    max_energy_excess: float = None
    energy_increases: int = 0
    max_distance: float = 0.0
    failures: list = field(default_factory=list)


def probe_directions(n, extra=4, seed=0):
    """Unit vectors ±e_i plus ``extra`` random directions"""
    eye = np.eye(n)
    directions = [v for i in range(n) for v in (eye[i], -eye[i])]
    rng = np.random.default_rng(seed)
    for _ in range(extra):
        v = rng.standard_normal(n)
        directions.append(v / np.linalg.norm(v))
    return np.array(directions)


def boundedness_probe(model, radius=10.0, horizon=100.0, samples=201, extra_directions=4, seed=0, cfg=None):
    """
    Integrate x' = f(x, 0) from states at distance ``radius`` from x*

    For Hamiltonian models H(x(t)) <= H(x0) + 1e-6 is required at every sample;
    H increases above 1e-7 between consecutive samples are counted. For NODE
    models only finiteness is checked. Failures are reported, not raised.

    Returns:
        ProbeResult
    """
    cfg = cfg or PROBE_INTEGRATION
    n = model.state_dim
    x_star = model.equilibrium() if model.has_hamiltonian else np.zeros(n)
    times = np.linspace(0.0, horizon, samples)
    f = model.numpy_rhs()
    result = ProbeResult(passed=True, finite=True, starts=0, radius=radius, horizon=horizon)
    if model.has_hamiltonian:
        result.max_energy_excess = -np.inf
    for direction in probe_directions(n, extra_directions, seed):
        x0 = x_star + radius * direction
        result.starts += 1
        try:
            traj = integrate(f, x0, times, None, cfg)
        except DivergenceError as e:
            result.passed = False
            result.finite = False
            result.failures.append(f"start {x0.tolist()}: {e}")
            continue
        distance = float(np.max(np.linalg.norm(traj.states - x_star, axis=1)))
        result.max_distance = max(result.max_distance, distance)
        if not model.has_hamiltonian:
            continue
        energy = phs.hamiltonian_batch(model, traj.states)
        excess = float(np.max(energy - energy[0]))
        result.max_energy_excess = max(result.max_energy_excess, excess)
        result.energy_increases += int(np.sum(np.diff(energy) > 1e-7))
        if excess > 1e-6:
            result.passed = False
            result.failures.append(f"start {x0.tolist()}: H grew by {excess:.3e}")
    logger.info(
        "Boundedness probe (radius %g, horizon %g): %s", radius, horizon, "pass" if result.passed else "FAIL"
    )
    return result


def _aligned(pred, truth):
    if len(pred) != len(truth) or not np.allclose(pred.times, truth.times, rtol=1e-12, atol=1e-12):
        raise DataError("Prediction and truth are sampled on different time grids")
    if pred.state_dim != truth.state_dim:
        raise DataError(f"Prediction has {pred.state_dim} states, truth has {truth.state_dim}")


def rmse_per_dim(pred, truth, dims=None):
    """Root mean squared error of each selected state dimension"""
    _aligned(pred, truth)
    dims = list(range(truth.state_dim)) if dims is None else list(dims)
    diff = pred.states[:, dims] - truth.states[:, dims]
    return np.sqrt(np.mean(diff * diff, axis=0))


def rmse(pred, truth, dims=None):
    """Root mean squared error over the selected dimensions and all samples"""
    _aligned(pred, truth)
    dims = list(range(truth.state_dim)) if dims is None else list(dims)
    diff = pred.states[:, dims] - truth.states[:, dims]
    return float(np.sqrt(np.mean(diff * diff)))
