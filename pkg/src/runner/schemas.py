"""
Esquemas de escenarios y reportes.

Los archivos de escenario son JSON: un objeto o una lista de objetos
{"kind", "payload", "seed", "tolerances", "outputs", "policy"}. El payload
se valida contra el esquema de su tipo antes de cualquier cálculo, y los
errores nombran el campo que falla (por ejemplo "payload.q.2").

Los números complejos se escriben como [re, im] (también se acepta un
número real suelto).

Ejemplo de uso:
    from src.runner.schemas import Scenario

    scenario = Scenario.model_validate({"kind": "theta-check", "payload": {"g": 2}})
    payload = scenario.typed_payload()
"""

import hashlib
import json
from enum import Enum
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    ValidationError,
    field_validator,
    model_validator,
)

from src.config.settings import settings
from src.special.siegel_theta import PeriodMatrix, TruncationPolicy
from src.special.weierstrass import EllipticLattice
from src.utils.helpers import complex_pair


def _to_complex(value: Any) -> complex:
    if isinstance(value, bool):
        raise ValueError("se esperaba un número, no un booleano")
    if isinstance(value, (int, float, complex)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ValueError(f"se esperaba un número o un par [re, im], recibido {value!r}")


Complex = Annotated[Any, BeforeValidator(_to_complex), PlainSerializer(complex_pair, return_type=list)]
ComplexVector = List[Complex]


def describe_validation_error(exc: ValidationError, prefix: str = "") -> str:
    """Mensaje de una línea por error, con la ruta del campo que falla."""
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"])
        path = f"{prefix}.{loc}" if prefix and loc else (prefix or loc)
        parts.append(f"{path}: {err['msg']}" if path else err["msg"])
    return "; ".join(parts)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# --- bloques compartidos -------------------------------------------------------------

class PeriodMatrixConfig(_Strict):
    """Matriz de periodos {"g", "B_re", "B_im"}."""

    g: int = Field(ge=1, le=6)
    B_re: List[List[float]]
    B_im: List[List[float]]

    @model_validator(mode="after")
    def _check_shape(self) -> "PeriodMatrixConfig":
        for name in ("B_re", "B_im"):
            rows = getattr(self, name)
            if len(rows) != self.g:
                raise ValueError(f"{name} debe tener {self.g} filas (tiene {len(rows)})")
            for i, row in enumerate(rows):
                if len(row) != self.g:
                    raise ValueError(f"{name}[{i}] debe tener {self.g} entradas (tiene {len(row)})")
        return self

    def build(self) -> PeriodMatrix:
        return PeriodMatrix.from_config(self.model_dump())


class LatticeConfig(_Strict):
    """Red 2ω1Z + 2ω2Z desde {"omega1": [re, im], "omega2": [re, im]}."""

    omega1: Complex
    omega2: Complex

    def build(self) -> EllipticLattice:
        return EllipticLattice(self.omega1, self.omega2)


class PolicyConfig(_Strict):
    target_abs_tol: float = Field(default_factory=lambda: settings.THETA_LAB_TOL, gt=0)
    radius: Optional[float] = Field(None, gt=0)
    max_terms: int = Field(default_factory=lambda: settings.THETA_LAB_MAX_TERMS, ge=1)
    im_window: float = Field(default_factory=lambda: settings.THETA_LAB_IM_WINDOW, gt=0)

    def build(self) -> TruncationPolicy:
        return TruncationPolicy(target_abs_tol=self.target_abs_tol, radius=self.radius,
                                max_terms=self.max_terms, im_window=self.im_window)


class OutputsConfig(_Strict):
    """Artefactos opcionales además del reporte."""

    csv: bool = False
    plot: bool = False
    timing: bool = False


class _PeriodChoice(_Strict):
    """Una matriz de periodos explícita o, en género 1, solo τ."""

    period: Optional[PeriodMatrixConfig] = None
    tau: Optional[Complex] = None

    @model_validator(mode="after")
    def _one_period(self):
        if (self.period is None) == (self.tau is None):
            raise ValueError("indique exactamente uno de 'period' o 'tau'")
        return self

    def build_period(self) -> PeriodMatrix:
        return self.period.build() if self.period is not None else PeriodMatrix([[self.tau]])


class LineConfig(_PeriodChoice):
    """Recta x ↦ Ux + Vt + Z con su ventana de búsqueda de ceros."""

    U: ComplexVector
    V: ComplexVector
    Z: ComplexVector
    window: Tuple[Complex, Complex]


# --- datos de curva -----------------------------------------------------------------

class LaurentTailConfig(_Strict):
    top: int
    coeffs: ComplexVector


class MarkedPointConfig(_Strict):
    U: List[ComplexVector] = Field(min_length=2)
    Omega: Dict[str, LaurentTailConfig] = Field(default_factory=dict)
    Abel0: ComplexVector
    Abel: Optional[List[ComplexVector]] = None

    @field_validator("Omega")
    @classmethod
    def _omega_keys(cls, value: Dict[str, LaurentTailConfig]) -> Dict[str, LaurentTailConfig]:
        for key in value:
            parts = key.split(",")
            if len(parts) != 2 or not all(p.strip().lstrip("-").isdigit() for p in parts):
                raise ValueError(f"clave de Omega '{key}' no tiene la forma 'beta,i'")
        return value


class CurveDatumConfig(_Strict):
    """CurveDatum importado: {"B", "points", "Z", "trunc_order", "validate"}."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    B: PeriodMatrixConfig
    points: List[MarkedPointConfig] = Field(min_length=1, max_length=3)
    Z: ComplexVector
    trunc_order: int = Field(8, ge=1)
    check_abel: bool = Field(True, alias="validate")

    def build(self, pol: Optional[TruncationPolicy] = None):
        from src.solutions.baker_akhiezer import CurveDatum

        return CurveDatum.from_config(self.model_dump(mode="json", by_alias=True), pol)


class GenusOneCurveConfig(_Strict):
    """Dato de curva de C/(Z + τZ) con puntos marcados en las posiciones dadas."""

    tau: Complex = 1j
    marked: ComplexVector = Field(default_factory=lambda: [0j], min_length=1, max_length=3)
    Z: Optional[ComplexVector] = None
    trunc: int = Field(12, ge=2)

    def build(self, pol: Optional[TruncationPolicy] = None):
        from src.conditions.genus_one import genus_one_curve_datum, genus_one_period

        return genus_one_curve_datum(genus_one_period(self.tau), self.marked, self.Z, self.trunc, pol)


class _CurveChoice(_Strict):
    curve: Optional[CurveDatumConfig] = None
    genus_one: Optional[GenusOneCurveConfig] = None

    @model_validator(mode="after")
    def _one_curve(self):
        if self.curve is not None and self.genus_one is not None:
            raise ValueError("indique solo uno de 'curve' o 'genus_one'")
        return self

    def build_curve(self, pol: Optional[TruncationPolicy] = None, marked=(0j,)):
        if self.curve is not None:
            return self.curve.build(pol)
        source = self.genus_one or GenusOneCurveConfig(marked=list(marked))
        return source.build(pol)


# --- payloads por tipo ------------------------------------------------------------------

class ThetaCheckPayload(_Strict):
    g: int = Field(2, ge=1, le=4)
    samples: int = Field(100, ge=0)
    period: Optional[PeriodMatrixConfig] = None
    weierstrass: bool = True
    lattice: LatticeConfig = Field(default_factory=lambda: LatticeConfig(omega1=0.5, omega2=0.17 + 0.62j))
    lame_grid: int = Field(10, ge=1)


class _ParticlePayload(_Strict):
    N: Optional[int] = Field(None, ge=1)
    q: ComplexVector
    p: ComplexVector
    lattice: LatticeConfig
    z: Complex
    dt: float = Field(gt=0)
    steps: int = Field(ge=0)
    kmax: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _check_sizes(self):
        if len(self.q) != len(self.p):
            raise ValueError(f"q y p deben tener la misma longitud ({len(self.q)} vs {len(self.p)})")
        if self.N is not None and self.N != len(self.q):
            raise ValueError(f"N = {self.N} no coincide con len(q) = {len(self.q)}")
        return self


class CMPayload(_ParticlePayload):
    system: Literal["cm"] = "cm"
    kappa: Optional[float] = None
    drift_bound: float = Field(1e-6, gt=0)
    heat: bool = False


class RSPayload(_ParticlePayload):
    system: Literal["rs"] = "rs"
    gradient: Literal["analytic", "numeric"] = "analytic"


class BetheMarchConfig(_Strict):
    q_prev: ComplexVector
    q_curr: ComplexVector
    levels: int = Field(3, ge=1)


class BethePayload(_Strict):
    """
    Niveles de Bethe: la familia de espaciado fijo desde q (alias de q0) o
    una marcha desde dos niveles. Ignora los campos de simulación (p, z, dt,
    steps) del objeto corto compartido con cm y rs.
    """

    model_config = ConfigDict(extra="ignore", populate_by_name=True)

    system: Literal["bethe"] = "bethe"
    N: Optional[int] = Field(None, ge=1)
    lattice: LatticeConfig
    q0: Optional[ComplexVector] = Field(None, alias="q")
    window: Tuple[int, int] = (-2, 2)
    spacing: float = 1.0
    march: Optional[BetheMarchConfig] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.q0 is None) == (self.march is None):
            raise ValueError("indique exactamente uno de 'q' o 'march'")
        if self.N is not None and self.q0 is not None and self.N != len(self.q0):
            raise ValueError(f"N = {self.N} no coincide con len(q) = {len(self.q0)}")
        return self


SECANT_CHECKS = ("linear_kp", "flex_B", "cm_C", "tangent_B", "rs_C", "trisecant_B", "bdhe_C", "quadrisecant")
DEFAULT_SECANT_CHECKS = {
    "kp": ["linear_kp", "flex_B", "cm_C"],
    "toda": ["tangent_B", "rs_C"],
    "bdhe": ["trisecant_B", "bdhe_C"],
    "prym": ["quadrisecant"],
}


class GenusOneSecantConfig(_Strict):
    """Dato positivo construido en género 1 (los (p, E) o (c1, c2, c3) se ajustan)."""

    mode: Literal["kp", "toda", "bdhe", "prym"]
    tau: Complex = 1j
    U: ComplexVector
    V: ComplexVector
    A: Optional[ComplexVector] = None
    W: Optional[ComplexVector] = None
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _needs(self):
        if self.mode == "prym" and self.W is None:
            raise ValueError("el modo prym requiere W")
        if self.mode != "prym" and self.A is None:
            raise ValueError(f"el modo {self.mode} requiere A")
        return self


class SecantDatumConfig(_Strict):
    B: PeriodMatrixConfig
    U: ComplexVector
    V: ComplexVector
    A: ComplexVector
    W: Optional[ComplexVector] = None
    zeta_shift: Optional[ComplexVector] = None
    p: Complex = 0j
    E: Complex = 0j
    constants: Dict[str, Complex] = Field(default_factory=dict)
    mode: Literal["kp", "toda", "bdhe", "prym"] = "kp"


class SampleConfig(_Strict):
    count: int = Field(6, ge=0)
    classical: Optional[bool] = None
    window_size: float = Field(1.0, gt=0)
    seed: Optional[int] = None


class SecantPayload(_Strict):
    factory: Optional[GenusOneSecantConfig] = None
    datum: Optional[SecantDatumConfig] = None
    checks: Optional[List[Literal[SECANT_CHECKS]]] = None
    sample: SampleConfig = Field(default_factory=SampleConfig)
    grid: List[Tuple[Complex, float]] = Field(
        default_factory=lambda: [(0.1, 0.0), (0.35 + 0.1j, 0.2), (-0.2 + 0.05j, 0.5)])
    Z: Optional[ComplexVector] = None
    fit: bool = False
    negative_draws: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _one_datum(self):
        if (self.factory is None) == (self.datum is None):
            raise ValueError("indique exactamente uno de 'factory' o 'datum'")
        return self

    @property
    def mode(self) -> str:
        return (self.factory or self.datum).mode


class InvolutionPayload(LineConfig):
    variant: Literal["kp", "toda"] = "kp"
    V: Optional[ComplexVector] = None
    Z: ComplexVector = Field(alias="zeta")
    branch: int = 1

    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class WavePayload(LineConfig):
    S: int = Field(6, ge=1, le=8)
    periodic: bool = False
    t0: float = 0.0
    x0: Optional[Complex] = None
    length: Optional[float] = Field(None, gt=0)
    n_nodes: int = Field(128, ge=8)


class KPPayload(_CurveChoice):
    grid: List[Tuple[Complex, Complex, Complex]] = Field(
        default_factory=lambda: [(0.1, 0.0, 0.0), (0.23, 0.1, 0.05), (-0.15 + 0.05j, 0.3, 0.2)])
    h: float = Field(1e-2, gt=0)
    richardson: bool = True
    const: Optional[Complex] = None
    order_check: bool = False


class TodaPayload(_CurveChoice):
    grid: List[Tuple[int, Complex, Complex]] = Field(
        default_factory=lambda: [(0, 0.1, 0.05), (1, -0.2 + 0.1j, 0.15), (-1, 0.05, -0.1)])
    layout: Optional[Literal["forward", "backward"]] = None
    h: float = Field(1e-2, gt=0)


class BDHEPayload(_Strict):
    tau: Complex = 1j
    shifts: Tuple[Complex, Complex, Complex] = (0.31 + 0.02j, 0.17 + 0.23j, 0.41 + 0.29j)
    Z: Complex = 0.1 + 0.05j
    box: Tuple[int, int, int] = (4, 3, 3)
    seed: Optional[int] = None


# --- escenario -------------------------------------------------------------------------

class ScenarioKind(str, Enum):
    THETA_CHECK = "theta-check"
    CM = "cm"
    RS = "rs"
    BETHE = "bethe"
    SECANT = "secant"
    INVOLUTION = "involution"
    WAVE = "wave"
    KP = "kp"
    TODA = "toda"
    BDHE = "bdhe"


PAYLOAD_SCHEMAS = {
    ScenarioKind.THETA_CHECK: ThetaCheckPayload,
    ScenarioKind.CM: CMPayload,
    ScenarioKind.RS: RSPayload,
    ScenarioKind.BETHE: BethePayload,
    ScenarioKind.SECANT: SecantPayload,
    ScenarioKind.INVOLUTION: InvolutionPayload,
    ScenarioKind.WAVE: WavePayload,
    ScenarioKind.KP: KPPayload,
    ScenarioKind.TODA: TodaPayload,
    ScenarioKind.BDHE: BDHEPayload,
}


class Scenario(_Strict):
    """
    Escenario ejecutable.

    Attributes:
        kind: Tipo de escenario (decide el módulo que lo atiende)
        name: Nombre para reportes; por defecto el del archivo
        payload: Configuración propia del tipo (se valida al construir)
        seed: Semilla de los sorteos del escenario
        tolerances: Umbrales que reemplazan a DEFAULT_THRESHOLDS
        outputs: Artefactos opcionales
        policy: Política de truncamiento de theta
    """

    kind: ScenarioKind
    name: Optional[str] = None
    payload: Dict[str, Any] = Field(default_factory=dict)
    seed: int = Field(default_factory=lambda: settings.THETA_LAB_SEED)
    tolerances: Dict[str, float] = Field(default_factory=dict)
    outputs: OutputsConfig = Field(default_factory=OutputsConfig)
    policy: PolicyConfig = Field(default_factory=PolicyConfig)

    @model_validator(mode="after")
    def _validate_payload(self) -> "Scenario":
        try:
            PAYLOAD_SCHEMAS[self.kind].model_validate(self.payload)
        except ValidationError as exc:
            raise ValueError(describe_validation_error(exc, "payload")) from None
        return self

    def typed_payload(self) -> BaseModel:
        """Payload validado contra el esquema de su tipo."""
        return PAYLOAD_SCHEMAS[self.kind].model_validate(self.payload)

    def digest(self) -> str:
        blob = json.dumps(self.model_dump(mode="json"), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# --- reportes ---------------------------------------------------------------------------

class ResidualEntry(BaseModel):
    """
    Un residuo con su umbral.

    bound="upper" aprueba si value ≤ threshold (identidades); bound="lower"
    aprueba si value ≥ threshold (controles negativos, pendientes, órdenes).
    Sin umbral se aprueba todo valor finito.
    """

    model_config = ConfigDict(ser_json_inf_nan="constants")

    name: str
    value: float
    threshold: Optional[float] = None
    bound: Literal["upper", "lower"] = "upper"
    passed: bool = True

    @classmethod
    def judge(cls, name: str, value: float, threshold: Optional[float],
              bound: str = "upper") -> "ResidualEntry":
        value = float(value)
        if threshold is None:
            passed = bool(np.isfinite(value))
        elif bound == "upper":
            passed = bool(value <= threshold)
        else:
            passed = bool(value >= threshold)
        return cls(name=name, value=value, threshold=threshold, bound=bound, passed=passed)


class ResidualReport(BaseModel):
    """
    Reporte de un escenario.

    Attributes:
        scenario: Nombre del escenario
        digest: Hash del escenario validado (para re-ejecutarlo)
        status: "pass", "fail" (algún residuo fuera de umbral) o "error"
        residuals: Residuos con su veredicto
        provenance: Semillas, truncamiento, mallas y constantes ajustadas
        seconds: Tiempo de pared; solo se persiste con outputs.timing
    """

    model_config = ConfigDict(ser_json_inf_nan="constants")

    scenario: str
    kind: Optional[str] = None
    digest: str = ""
    seed: Optional[int] = None
    status: Literal["pass", "fail", "error"] = "pass"
    residuals: List[ResidualEntry] = Field(default_factory=list)
    provenance: Dict[str, Any] = Field(default_factory=dict)
    deviations: List[str] = Field(default_factory=list)
    error: Optional[str] = None
    seconds: Optional[float] = None

    @property
    def exit_code(self) -> int:
        return {"pass": 0, "fail": 2, "error": 1}[self.status]

    @property
    def max_residual(self) -> Optional[float]:
        values = [r.value for r in self.residuals if r.bound == "upper" and np.isfinite(r.value)]
        return max(values) if values else None

    def to_json(self, timing: bool = False) -> str:
        return self.model_dump_json(indent=2, exclude=None if timing else {"seconds"})


class SummaryRow(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    scenario: str
    file: str
    status: Literal["pass", "fail", "error"]
    max_residual: Optional[float] = None
    seconds: float = 0.0
    exit_code: int = 0


class BatchSummary(BaseModel):
    rows: List[SummaryRow] = Field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return worst_exit_code(row.exit_code for row in self.rows)


_SEVERITY = {0: 0, 2: 1, 1: 2}


def worst_exit_code(codes) -> int:
    """El peor código: error (1) por encima de fallo de umbral (2) por encima de éxito (0)."""
    worst = 0
    for code in codes:
        if _SEVERITY[code] > _SEVERITY[worst]:
            worst = code
    return worst
