"""
Ejecución de escenarios y lotes.

Cada tipo de escenario tiene un manejador en HANDLERS que llama al módulo
correspondiente y devuelve residuos con nombre, procedencia y tablas. Aquí
se juzgan contra los umbrales (DEFAULT_THRESHOLDS, o los del escenario) y se
escriben el reporte JSON/CSV y los artefactos opcionales.

Códigos de salida: 0 si todo pasa, 2 si algún residuo queda fuera de su
umbral, 1 si hubo un error.

Ejemplo de uso:
    from src.runner import run, batch

    reports = run("scenarios/cm2.json", out_dir="reports")
    summary = batch("scenarios/", threads=4)
"""

import csv
import io
import json
import logging
import math
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ValidationError

from src.conditions.genus_one import (
    classical_divisor_sample,
    genus_one_bdhe_datum,
    genus_one_bdhe_grid,
    genus_one_kp_datum,
    genus_one_period,
    genus_one_prym_datum,
    genus_one_toda_datum,
    genus_one_toda_involution_V,
)
from src.conditions.involution import involution_kp_conditions, involution_toda_conditions
from src.conditions.secant_conditions import (
    SecantDatum,
    bdhe_condition_C_residual,
    cm_condition_C_residual,
    flex_residual_B,
    linear_problem_residual_kp,
    negative_control_median,
    quadrisecant_residual,
    rs_condition_C_residual,
    sample_theta_divisor,
    tangent_trisecant_residual_B,
    trisecant_residual_B,
)
from src.config.settings import DEFAULT_THRESHOLDS, LOWER_BOUND_CHECKS, settings
from src.divisor.tau_divisor import TauLine
from src.runner.schemas import (
    DEFAULT_SECANT_CHECKS,
    BatchSummary,
    ResidualEntry,
    ResidualReport,
    Scenario,
    ScenarioKind,
    SummaryRow,
    describe_validation_error,
    worst_exit_code,
)
from src.solutions.baker_akhiezer import (
    TODA_LAYOUTS,
    bdhe_tau_residual,
    kp_residual,
    toda_layout_comparison,
    toda_residual,
)
from src.solutions.wave_series import obstruction_propagation_gap, wave_recursion
from src.special.siegel_theta import (
    TruncationPolicy,
    addition_residual,
    quasiperiodicity_residual,
    random_period_matrix,
    theta_eval,
)
from src.special.weierstrass import EllipticLattice, lame_residual, phi_lame
from src.systems.double_bloch import heat_to_lax_reduction
from src.systems.pole_systems import (
    CMState,
    RSState,
    bethe_march,
    bethe_residual,
    calibrate_cm_coupling,
    cm_flow,
    lax_residual,
    rs_flow,
    spectral_invariants,
    unit_spacing_trajectory,
)
from src.utils.errors import ConfigInvalid, ThetaLabError
from src.utils.helpers import RunMetrics, complex_pair, timing_decorator

logger = logging.getLogger(__name__)

# La escritura de reportes y artefactos es serial aunque los escenarios corran en paralelo
_WRITE_LOCK = threading.Lock()

SIMULATION_KINDS = (ScenarioKind.CM, ScenarioKind.RS, ScenarioKind.BETHE)


@dataclass
class HandlerOutput:
    """
    Resultado de un manejador antes de juzgar umbrales.

    Attributes:
        residuals: Tuplas (nombre, valor, clave de umbral)
        provenance: Datos para re-ejecutar y auditar
        deviations: Desviaciones registradas (no fatales)
        tables: nombre -> (encabezado o None, filas) para CSV y datos de gráfico
    """

    residuals: List[Tuple[str, float, str]] = field(default_factory=list)
    provenance: Dict[str, Any] = field(default_factory=dict)
    deviations: List[str] = field(default_factory=list)
    tables: Dict[str, Tuple[Optional[List[str]], List[List[float]]]] = field(default_factory=dict)

    def add(self, name: str, value: float, key: Optional[str] = None):
        self.residuals.append((name, float(value), key or name))


@dataclass
class RunContext:
    scenario: Scenario
    pol: TruncationPolicy
    threads: int


@dataclass
class ScenarioResult:
    scenario: Scenario
    report: ResidualReport
    output: HandlerOutput


# --- manejadores por tipo ----------------------------------------------------------------

def _random_point(rng: np.random.Generator, g: int) -> np.ndarray:
    return rng.uniform(-0.5, 0.5, g) + 1j * rng.uniform(-0.5, 0.5, g)


def _lame_grid(lat: EllipticLattice, n: int) -> float:
    grid = np.linspace(0.25, 0.75, n)
    worst = 0.0
    for a in grid:
        for b in grid:
            x = 2 * a * lat.omega1 + 2 * b * lat.omega2
            z = 2 * (0.3 + 0.4 * b) * lat.omega1 + 2 * (0.2 + 0.5 * a) * lat.omega2
            if lat.lattice_distance(z - x) < 1e-3:
                continue
            worst = max(worst, lame_residual(x, z, lat))
    return worst


def _phi_pole_slope(lat: EllipticLattice) -> float:
    """Pendiente log-log de |Φ(x, z) - 1/x| cuando x → 0; ≈ 1 si Φ no tiene término constante."""
    z = 0.31 + 0.22j
    xs = np.array([1e-2, 1e-3, 1e-4, 1e-5]) * (1 + 0.5j)
    dev = np.abs(np.array([phi_lame(x, z, lat) for x in xs]) - 1 / xs)
    return float(np.polyfit(np.log(np.abs(xs)), np.log(dev), 1)[0])


def _run_theta_check(ctx: RunContext, cfg) -> HandlerOutput:
    out = HandlerOutput()
    rng = np.random.default_rng(ctx.scenario.seed)
    period = cfg.period.build() if cfg.period is not None else random_period_matrix(cfg.g, rng)
    g = period.g
    quasi, addition, evenness = [], [], []
    for _ in range(cfg.samples):
        z, w = _random_point(rng, g), _random_point(rng, g)
        m, n = rng.integers(-2, 3, g), rng.integers(-1, 2, g)
        quasi.append(quasiperiodicity_residual(z, m, n, period, ctx.pol))
        addition.append(addition_residual(z, w, period, ctx.pol))
        value = theta_eval(z, period, ctx.pol)
        evenness.append(abs(theta_eval(-z, period, ctx.pol) - value) / (1.0 + abs(value)))
    out.add("theta.quasiperiodicity", max(quasi, default=0.0))
    out.add("theta.addition", max(addition, default=0.0))
    out.add("theta.evenness", max(evenness, default=0.0))
    out.provenance.update({"period": period.to_config(), "samples": cfg.samples})

    if cfg.weierstrass:
        lat = cfg.lattice.build()
        out.add("weierstrass.legendre", lat.legendre_residual)
        out.add("weierstrass.lame", _lame_grid(lat, cfg.lame_grid))
        out.add("weierstrass.phi_pole_slope", _phi_pole_slope(lat))
        out.provenance["lattice"] = lat.to_config()
    return out


def _trace_drift(first, last, z: complex, kmax: int) -> float:
    start = spectral_invariants(first, z, kmax)["traces"]
    end = spectral_invariants(last, z, kmax)["traces"]
    return float(np.max(np.abs(end - start)) / max(1.0, float(np.max(np.abs(start)))))


def _particle_header(N: int, kmax: int) -> List[str]:
    cols = ["t"]
    for part in ("re_q", "im_q", "re_p", "im_p"):
        cols += [f"{part}{i}" for i in range(N)]
    return cols + ["H"] + [f"tr_L{k}" for k in range(1, kmax + 1)]


def _run_cm(ctx: RunContext, cfg) -> HandlerOutput:
    out = HandlerOutput()
    lat = cfg.lattice.build()
    s0 = CMState(q=cfg.q, p=cfg.p, lat=lat)
    if cfg.kappa is None:
        kappa, fit = calibrate_cm_coupling(lat)
        out.provenance["coupling_fit_residual"] = fit
    else:
        kappa = cfg.kappa
    out.provenance["kappa"] = kappa

    out.add("cm.lax", lax_residual(s0, cfg.z, kappa))
    if s0.N > 1:
        # Ni κ = -2 (forma hamiltoniana) ni -κ satisfacen L̇ = [M, L]
        out.add("cm.negative_sign", lax_residual(s0, cfg.z, -2.0))
        out.add("cm.negative_sign_flipped", lax_residual(s0, cfg.z, -kappa), key="cm.negative_sign")

    traj = cm_flow(s0, cfg.dt, cfg.steps, kappa, cfg.drift_bound)
    kmax = cfg.kmax or s0.N
    out.add("cm.isospectrality", _trace_drift(traj.state(0), traj.state(len(traj) - 1), cfg.z, kmax))
    e0 = traj.energy[0]
    out.add("cm.energy_drift", np.max(np.abs(traj.energy - e0)) / max(1.0, abs(e0)))

    if cfg.heat:
        reductions = [heat_to_lax_reduction(s0, cfg.z, eigen_index=i) for i in range(s0.N)]
        out.add("cm.heat", max(r.heat_residual for r in reductions))
        out.provenance["heat_k"] = [r.k for r in reductions]
    out.tables["trajectory"] = (_particle_header(s0.N, kmax), traj.table(cfg.z, kmax))
    return out


def _run_rs(ctx: RunContext, cfg) -> HandlerOutput:
    out = HandlerOutput()
    lat = cfg.lattice.build()
    s0 = RSState(q=cfg.q, p=cfg.p, lat=lat)
    traj = rs_flow(s0, cfg.dt, cfg.steps, cfg.gradient)
    kmax = cfg.kmax or s0.N
    last = len(traj.times) - 1
    out.add("rs.isospectrality", _trace_drift(traj.state(0), traj.state(last), cfg.z, kmax))
    h0 = traj.hamiltonian[0]
    out.add("rs.hamiltonian_drift", np.max(np.abs(traj.hamiltonian - h0)) / max(1.0, abs(h0)))
    out.provenance["gradient"] = cfg.gradient

    rows = []
    for i, t in enumerate(traj.times):
        s = traj.state(i)
        traces = spectral_invariants(s, cfg.z, kmax)["traces"]
        rows.append([float(t)] + list(s.q.real) + list(s.q.imag) + list(s.p.real) + list(s.p.imag)
                    + [traj.hamiltonian[i].real] + [complex(tr).real for tr in traces])
    out.tables["trajectory"] = (_particle_header(s0.N, kmax), rows)
    return out


def _run_bethe(ctx: RunContext, cfg) -> HandlerOutput:
    out = HandlerOutput()
    lat = cfg.lattice.build()
    if cfg.march is not None:
        traj = bethe_march(cfg.march.q_prev, cfg.march.q_curr, lat, cfg.march.levels)
    else:
        traj = unit_spacing_trajectory(cfg.q0, lat, cfg.window, cfg.spacing)
    levels = sorted(traj.levels)
    worst = max((abs(bethe_residual(traj, n, i)) for n in levels[1:-1] for i in range(traj.k)), default=0.0)
    # los niveles de la marcha salen de Newton y tienen su propio umbral
    out.add("bethe.march_residual" if cfg.march is not None else "bethe.residual", worst)
    out.provenance["levels"] = [levels[0], levels[-1]]
    header = ["n"] + [f"re_q{i}" for i in range(traj.k)] + [f"im_q{i}" for i in range(traj.k)]
    rows = [[n] + list(traj.levels[n].real) + list(traj.levels[n].imag) for n in levels]
    out.tables["levels"] = (header, rows)
    return out


_SECANT_FACTORIES = {
    "kp": genus_one_kp_datum,
    "toda": genus_one_toda_datum,
    "bdhe": genus_one_bdhe_datum,
}

# (dato, muestra del divisor, malla, Z, ajuste, política) -> residuo
_SECANT_EVALUATORS: Dict[str, Callable[..., float]] = {
    "linear_kp": lambda d, sample, grid, Z, fit, pol: linear_problem_residual_kp(d, Z, grid),
    "flex_B": lambda d, *_: flex_residual_B(d),
    "tangent_B": lambda d, *_: tangent_trisecant_residual_B(d),
    "trisecant_B": lambda d, *_: trisecant_residual_B(d),
    "cm_C": lambda d, sample, grid, Z, fit, pol: cm_condition_C_residual(d.B, d.U, d.V, sample, pol),
    "rs_C": lambda d, sample, grid, Z, fit, pol: rs_condition_C_residual(d.B, d.U, d.V, sample, pol),
    "bdhe_C": lambda d, sample, grid, Z, fit, pol: bdhe_condition_C_residual(d.B, d.U, d.V, sample, pol),
    "quadrisecant": lambda d, sample, grid, Z, fit, pol: max(quadrisecant_residual(d, sample, fit=fit)),
}


def _secant_datum(ctx: RunContext, cfg) -> SecantDatum:
    if cfg.factory is None:
        return SecantDatum.from_config(cfg.datum.model_dump(mode="json"), ctx.pol)
    f = cfg.factory
    period = genus_one_period(f.tau)
    if f.mode == "prym":
        return genus_one_prym_datum(period, f.U, f.V, f.W, pol=ctx.pol)
    seed = ctx.scenario.seed if f.seed is None else f.seed
    return _SECANT_FACTORIES[f.mode](period, f.U, f.V, f.A, seed=seed, pol=ctx.pol)


def _negative_pair(d: SecantDatum):
    return sample_theta_divisor(d.B, d.U, count=2, seed=1, window_size=1.5)


def _run_secant(ctx: RunContext, cfg) -> HandlerOutput:
    out = HandlerOutput()
    d = _secant_datum(ctx, cfg)
    checks = cfg.checks or DEFAULT_SECANT_CHECKS[d.mode]
    Z = cfg.Z if cfg.Z is not None else [0.1 + 0.05j] * d.g

    classical = cfg.sample.classical if cfg.sample.classical is not None else d.g == 1
    if classical:
        sample = classical_divisor_sample(d.B, cfg.sample.count)
    else:
        seed = ctx.scenario.seed if cfg.sample.seed is None else cfg.sample.seed
        sample = sample_theta_divisor(d.B, d.U, cfg.sample.count, seed=seed,
                                      window_size=cfg.sample.window_size, pol=ctx.pol)

    for name in checks:
        out.add(f"secant.{name}", _SECANT_EVALUATORS[name](d, sample, cfg.grid, Z, cfg.fit, ctx.pol))

    if cfg.negative_draws:
        for name in checks:
            evaluator = _SECANT_EVALUATORS[name]
            median = negative_control_median(
                lambda rd: evaluator(rd, _negative_pair(rd), cfg.grid, np.zeros(rd.g), False, rd.pol),
                g=2, draws=cfg.negative_draws, seed=ctx.scenario.seed)
            out.add(f"secant.{name}.negative", median, key="secant.negative_control")
        out.provenance["negative_controls"] = {"g": 2, "draws": cfg.negative_draws,
                                               "seed": ctx.scenario.seed}

    out.provenance.update({"datum": d.to_config(), "datum_digest": d.digest(),
                           "datum_provenance": d.provenance, "checks": list(checks),
                           "sample": {"classical": classical, "seed": sample.seed,
                                      "points": sample.provenance or len(sample)}})
    return out


def _run_involution(ctx: RunContext, cfg) -> HandlerOutput:
    out = HandlerOutput()
    period = cfg.build_period()
    V = cfg.V
    if V is None:
        if cfg.variant != "toda" or period.g != 1:
            raise ConfigInvalid("payload.V: requerido salvo en el caso Toda de género 1, donde se calibra")
        V = genus_one_toda_involution_V(period, cfg.U, branch=cfg.branch, pol=ctx.pol)
        out.provenance["V_calibrated"] = [complex_pair(v) for v in V]
    conditions = involution_kp_conditions if cfg.variant == "kp" else involution_toda_conditions
    report = conditions(period, cfg.U, V, cfg.Z, cfg.window, ctx.pol)
    for key, value in report.residuals().items():
        out.add(f"involution.{key}", value)
    out.provenance["report"] = report.to_config()
    return out


def _run_wave(ctx: RunContext, cfg) -> HandlerOutput:
    out = HandlerOutput()
    line = TauLine(B=cfg.build_period(), U=cfg.U, V=cfg.V, Z=cfg.Z, window=cfg.window, pol=ctx.pol)
    series = wave_recursion(line, cfg.S, periodic=cfg.periodic, t0=cfg.t0, x0=cfg.x0,
                            length=cfg.length, n_nodes=cfg.n_nodes, threads=ctx.threads)
    obstruction, propagation = 0.0, 0.0
    for entry in series.local:
        count = len(entry.obstructions)
        obstruction = max([obstruction] + [abs(v) for v in entry.obstructions])
        gaps = [obstruction_propagation_gap(series, entry.zero, s) for s in range(count - 1)]
        propagation = max([propagation] + gaps)
    out.add("wave.obstruction", obstruction)
    out.add("wave.propagation", propagation)
    if cfg.periodic:
        defects = [series.periodicity_defect(s) for s in range(1, series.order + 1)]
        out.add("wave.periodicity", max(defects, default=0.0))
    out.deviations.extend(series.deviations)
    out.provenance.update({"order": series.order, "halted_at": series.halted_at, "b": series.b,
                           "zeros": [z.q for z in series.zeros],
                           "path": {"x0": series.strip.path.x0, "length": series.strip.path.length,
                                    "n_nodes": series.strip.path.n}})

    path = series.strip.path
    header = ["re_x", "im_x"]
    for s in range(1, series.order + 1):
        header += [f"re_xi{s}", f"im_xi{s}"]
    rows = []
    for x in path.x:
        row = [x.real, x.imag]
        for s in range(1, series.order + 1):
            value = series(s, x)
            row += [value.real, value.imag]
        rows.append(row)
    out.tables["xi"] = (header, rows)
    return out


def _run_kp(ctx: RunContext, cfg) -> HandlerOutput:
    out = HandlerOutput()
    cd = cfg.build_curve(ctx.pol)
    report = kp_residual(cd, cfg.grid, cfg.h, cfg.richardson, cfg.const, threads=ctx.threads)
    out.add("kp.residual", report.max)
    if cfg.order_check:
        const = report.extras["const"]
        point = cfg.grid[:1]
        coarse = kp_residual(cd, point, 2 * cfg.h, False, const, threads=ctx.threads).max
        fine = kp_residual(cd, point, cfg.h, False, const, threads=ctx.threads).max
        out.add("kp.order", math.log2(coarse / fine) if fine > 0 else math.inf)
    out.provenance.update({"kp": report.to_config(), "curve": cd.to_config(), "h": cfg.h})
    out.tables["kp"] = (None, report.table)
    return out


def _run_toda(ctx: RunContext, cfg) -> HandlerOutput:
    out = HandlerOutput()
    cd = cfg.build_curve(ctx.pol, marked=(0j, 0.31 + 0.17j))
    if cfg.layout is None:
        comparison = toda_layout_comparison(cd, cfg.grid, cfg.h, ctx.threads)
        report = comparison[comparison["satisfied"]]
        out.provenance["layouts"] = {name: comparison[name].to_config() for name in TODA_LAYOUTS}
    else:
        report = toda_residual(cd, cfg.grid, cfg.layout, cfg.h, ctx.threads)
    out.add("toda.residual", report.max)
    out.provenance.update({"layout": report.extras["layout"], "toda": report.to_config(),
                           "curve": cd.to_config()})
    out.tables["toda"] = (None, report.table)
    return out


def _run_bdhe(ctx: RunContext, cfg) -> HandlerOutput:
    out = HandlerOutput()
    seed = ctx.scenario.seed if cfg.seed is None else cfg.seed
    tau_grid, info = genus_one_bdhe_grid(genus_one_period(cfg.tau), cfg.shifts, [cfg.Z], cfg.box,
                                         seed=seed, pol=ctx.pol)
    report = bdhe_tau_residual(tau_grid)
    out.add("bdhe.residual", report.max)
    out.provenance.update({"fit": info, "bdhe": report.to_config()})
    out.tables["bdhe"] = (None, report.table)
    return out


HANDLERS: Dict[ScenarioKind, Callable[[RunContext, BaseModel], HandlerOutput]] = {
    ScenarioKind.THETA_CHECK: _run_theta_check,
    ScenarioKind.CM: _run_cm,
    ScenarioKind.RS: _run_rs,
    ScenarioKind.BETHE: _run_bethe,
    ScenarioKind.SECANT: _run_secant,
    ScenarioKind.INVOLUTION: _run_involution,
    ScenarioKind.WAVE: _run_wave,
    ScenarioKind.KP: _run_kp,
    ScenarioKind.TODA: _run_toda,
    ScenarioKind.BDHE: _run_bdhe,
}


# --- carga y ejecución -------------------------------------------------------------------

def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigInvalid(f"No se pudo leer {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path.name}: JSON inválido en la línea {exc.lineno}: {exc.msg}") from exc


def _validate_items(raw: Any, path: Path) -> List[Scenario]:
    items = raw if isinstance(raw, list) else [raw]
    scenarios = []
    for index, item in enumerate(items):
        try:
            scenario = Scenario.model_validate(item)
        except ValidationError as exc:
            where = f"[{index}]" if isinstance(raw, list) else ""
            raise ConfigInvalid(f"{path.name}{where}: {describe_validation_error(exc)}") from None
        if scenario.name is None:
            scenario.name = path.stem if len(items) == 1 else f"{path.stem}-{index:02d}"
        scenarios.append(scenario)
    return scenarios


def load_scenarios(path) -> List[Scenario]:
    """
    Lee un archivo de escenarios (un objeto o una lista).

    Raises:
        ConfigInvalid: Si el archivo no se lee, no es JSON o algún escenario
            no valida; el mensaje nombra el campo que falla
    """
    path = Path(path)
    return _validate_items(_read_json(path), path)


def _override(scenario: Scenario, seed: Optional[int], tol: Optional[float]) -> Scenario:
    update: Dict[str, Any] = {}
    if seed is not None:
        update["seed"] = seed
    if tol is not None:
        update["policy"] = scenario.policy.model_copy(update={"target_abs_tol": tol})
    return scenario.model_copy(update=update) if update else scenario


def _json_safe(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    if isinstance(value, complex):
        return complex_pair(value)
    if isinstance(value, np.generic):
        return _json_safe(value.item())
    return value


def _threshold(scenario: Scenario, name: str, key: str) -> Optional[float]:
    for candidate in (name, key):
        if candidate in scenario.tolerances:
            return scenario.tolerances[candidate]
    return DEFAULT_THRESHOLDS.get(key)


def run_scenario(scenario: Scenario, threads: Optional[int] = None) -> ScenarioResult:
    """
    Ejecuta un escenario ya validado y arma su reporte.

    Los errores del módulo no se propagan: quedan en el reporte con
    status "error" y el nombre de la excepción.
    """
    threads = threads or settings.THETA_LAB_THREADS
    name = scenario.name or scenario.kind.value
    report = ResidualReport(scenario=name, kind=scenario.kind.value, digest=scenario.digest(),
                            seed=scenario.seed)
    output = HandlerOutput()
    start = time.perf_counter()
    try:
        ctx = RunContext(scenario=scenario, pol=scenario.policy.build(), threads=threads)
        output = HANDLERS[scenario.kind](ctx, scenario.typed_payload())
    except (ThetaLabError, ValueError) as exc:
        logger.error("Escenario %s: %s: %s", name, type(exc).__name__, exc)
        report.status, report.error = "error", f"{type(exc).__name__}: {exc}"
    except Exception as exc:
        logger.exception("Escenario %s: error inesperado", name)
        report.status, report.error = "error", f"{type(exc).__name__}: {exc}"
    else:
        report.residuals = [
            ResidualEntry.judge(res_name, value, _threshold(scenario, res_name, key),
                                "lower" if key in LOWER_BOUND_CHECKS else "upper")
            for res_name, value, key in output.residuals
        ]
        report.status = "pass" if all(r.passed for r in report.residuals) else "fail"
        report.deviations = list(output.deviations)
        for entry in report.residuals:
            if not entry.passed:
                logger.warning("Escenario %s: %s = %.3e fuera del umbral %s", name, entry.name,
                               entry.value, entry.threshold)
    report.seconds = round(time.perf_counter() - start, 3)
    report.provenance = _json_safe({"scenario": scenario.model_dump(mode="json"), **output.provenance})
    return ScenarioResult(scenario=scenario, report=report, output=output)


# --- escritura ----------------------------------------------------------------------------

def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name)


def _report_csv(reports: Sequence[ResidualReport]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["scenario", "kind", "digest", "status", "residual", "value", "threshold", "bound",
                     "passed", "error"])
    for report in reports:
        if not report.residuals:
            writer.writerow([report.scenario, report.kind, report.digest, report.status,
                             "", "", "", "", "", report.error or ""])
        for entry in report.residuals:
            writer.writerow([report.scenario, report.kind, report.digest, report.status, entry.name,
                             repr(entry.value), "" if entry.threshold is None else repr(entry.threshold),
                             entry.bound, entry.passed, ""])
    return buffer.getvalue()


def _write_table(path: Path, header: Optional[List[str]], rows: List[List[float]], plot: bool):
    if plot:
        lines = ["# " + (" ".join(header) if header else "coordenadas... residuo")]
        lines += [" ".join(f"{float(v):.17g}" for v in row) for row in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            writer.writerow(header)
        writer.writerows([[repr(float(v)) for v in row] for row in rows])


def write_results(results: Sequence[ScenarioResult], out_dir, stem: str, fmt: str = "json") -> Path:
    """
    Escribe el reporte de un archivo de escenarios y sus artefactos.

    El reporte es una lista (vacía si el archivo no tenía escenarios). El
    tiempo de pared solo se incluye con outputs.timing, de modo que dos
    corridas con las mismas semillas producen bytes idénticos.
    """
    out_dir = Path(out_dir)
    with _WRITE_LOCK:
        out_dir.mkdir(parents=True, exist_ok=True)
        target = out_dir / f"{_safe_name(stem)}.{fmt}"
        if fmt == "csv":
            target.write_text(_report_csv([r.report for r in results]), encoding="utf-8")
        else:
            blobs = [r.report.to_json(timing=r.scenario.outputs.timing) for r in results]
            target.write_text("[\n" + ",\n".join(blobs) + "\n]\n" if blobs else "[]\n", encoding="utf-8")
        for result in results:
            base = _safe_name(result.report.scenario)
            for table, (header, rows) in result.output.tables.items():
                if result.scenario.outputs.csv:
                    _write_table(out_dir / f"{base}.{table}.csv", header, rows, plot=False)
                if result.scenario.outputs.plot:
                    _write_table(out_dir / f"{base}.{table}.dat", header, rows, plot=True)
    logger.debug("Reporte escrito en %s", target)
    return target


def load_reports(path) -> List[ResidualReport]:
    """Lee un reporte JSON escrito por write_results."""
    raw = Path(path).read_text(encoding="utf-8")
    return [ResidualReport.model_validate(item) for item in json.loads(raw)]


@timing_decorator
def run(path, out_dir=None, seed: Optional[int] = None, tol: Optional[float] = None,
        threads: Optional[int] = None, fmt: str = "json") -> List[ResidualReport]:
    """
    Ejecuta un archivo de escenarios y escribe su reporte.

    Args:
        path: Archivo JSON con un escenario o una lista
        out_dir: Directorio de salida (THETA_LAB_OUT por defecto)
        seed: Reemplaza la semilla de cada escenario
        tol: Reemplaza target_abs_tol de la política de truncamiento
        threads: Hilos de los módulos (THETA_LAB_THREADS por defecto)
        fmt: "json" o "csv"

    Raises:
        ConfigInvalid: Si el archivo no valida
    """
    path = Path(path)
    scenarios = [_override(s, seed, tol) for s in load_scenarios(path)]
    results = [run_scenario(s, threads) for s in scenarios]
    write_results(results, out_dir or settings.THETA_LAB_OUT, path.stem, fmt)
    for result in results:
        logger.info("%s: %s (%.2fs)", result.report.scenario, result.report.status, result.report.seconds)
    return [r.report for r in results]


def check_identities(g: int = 2, samples: int = 100, seed: Optional[int] = None, out_dir=None,
                     tol: Optional[float] = None, threads: Optional[int] = None,
                     fmt: str = "json") -> ResidualReport:
    """Batería de identidades de theta y de Weierstrass para un B aleatorio de género g."""
    scenario = Scenario(kind=ScenarioKind.THETA_CHECK, name=f"check-identities-g{g}",
                        payload={"g": g, "samples": samples},
                        seed=settings.THETA_LAB_SEED if seed is None else seed)
    result = run_scenario(_override(scenario, None, tol), threads)
    write_results([result], out_dir or settings.THETA_LAB_OUT, scenario.name, fmt)
    return result.report


def cm_simulate(config, out_dir=None, seed: Optional[int] = None, tol: Optional[float] = None,
                threads: Optional[int] = None, fmt: str = "json") -> List[ResidualReport]:
    """
    Simula un sistema de partículas y escribe la trayectoria en CSV.

    Acepta un escenario completo o el objeto corto
    {"system": "cm"|"rs"|"bethe", "N", "q", "p", "lattice", "z", "dt", "steps"}.
    """
    path = Path(config)
    raw = _read_json(path)
    if isinstance(raw, dict) and "kind" not in raw:
        raw = {"kind": raw.get("system", "cm"), "payload": raw}
    scenarios = []
    for scenario in _validate_items(raw, path):
        if scenario.kind not in SIMULATION_KINDS:
            raise ConfigInvalid(f"{path.name}: kind '{scenario.kind.value}' no es una simulación (cm, rs, bethe)")
        scenario.outputs = scenario.outputs.model_copy(update={"csv": True})
        scenarios.append(_override(scenario, seed, tol))
    results = [run_scenario(s, threads) for s in scenarios]
    write_results(results, out_dir or settings.THETA_LAB_OUT, path.stem, fmt)
    return [r.report for r in results]


def batch(directory, out_dir=None, seed: Optional[int] = None, tol: Optional[float] = None,
          threads: Optional[int] = None, fmt: str = "json") -> BatchSummary:
    """
    Ejecuta todos los *.json de un directorio, en paralelo entre archivos.

    Las filas del resumen siguen el orden de los nombres de archivo; un
    archivo que no valida queda como una fila con status "error" y el resto
    corre igual. El resumen se escribe como summary.json o summary.csv.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigInvalid(f"{directory} no es un directorio")
    out_dir = Path(out_dir or settings.THETA_LAB_OUT)
    threads = threads or settings.THETA_LAB_THREADS
    files = sorted(directory.glob("*.json"), key=lambda p: p.name)
    logger.info("Lote %s: %d archivos, %d hilos", directory, len(files), threads)
    module_threads = 1 if threads > 1 else threads

    def work(indexed: Tuple[int, Path]) -> List[SummaryRow]:
        index, file = indexed
        start = time.perf_counter()
        try:
            scenarios = [_override(s, seed, tol) for s in load_scenarios(file)]
        except ConfigInvalid as exc:
            logger.error("[%d/%d] %s: %s", index, len(files), file.name, exc)
            return [SummaryRow(scenario=file.stem, file=file.name, status="error",
                               seconds=round(time.perf_counter() - start, 3), exit_code=1)]
        results = [run_scenario(s, module_threads) for s in scenarios]
        write_results(results, out_dir, file.stem, fmt)
        rows = [SummaryRow(scenario=r.report.scenario, file=file.name, status=r.report.status,
                           max_residual=r.report.max_residual, seconds=r.report.seconds or 0.0,
                           exit_code=r.report.exit_code) for r in results]
        logger.info("[%d/%d] %s: %s", index, len(files), file.name,
                    ", ".join(f"{row.scenario}={row.status}" for row in rows) or "sin escenarios")
        return rows

    with ThreadPoolExecutor(max_workers=threads) as pool:
        per_file = list(pool.map(work, enumerate(files, start=1)))
    summary = BatchSummary(rows=[row for rows in per_file for row in rows])

    metrics = RunMetrics()
    for row in summary.rows:
        if row.status == "error":
            metrics.record_error()
        else:
            metrics.record_check(row.scenario, row.max_residual or 0.0, row.status == "pass", row.seconds)
    logger.info("Lote terminado:\n%s", metrics)

    _write_summary(summary, out_dir, fmt)
    return summary


def _write_summary(summary: BatchSummary, out_dir: Path, fmt: str):
    with _WRITE_LOCK:
        out_dir.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            with (out_dir / "summary.csv").open("w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["scenario", "file", "status", "max_residual", "seconds", "exit_code"])
                for row in summary.rows:
                    writer.writerow([row.scenario, row.file, row.status,
                                     "" if row.max_residual is None else repr(row.max_residual),
                                     row.seconds, row.exit_code])
        else:
            (out_dir / "summary.json").write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")


def exit_code_for(reports: Sequence[ResidualReport]) -> int:
    return worst_exit_code(r.exit_code for r in reports)
