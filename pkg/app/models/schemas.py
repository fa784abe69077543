# app/models/schemas.py

from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import List, Literal, Optional, Dict, Any

from app.config import Settings

RingTag = Literal["rational", "complex", "series"]

# Input files
class EdgeRecord(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    id: str
    from_: str = Field(alias="from")
    to: str
    loop: Optional[bool] = None

    @model_validator(mode="after")
    def _loop_flag(self) -> "EdgeRecord":
        if self.loop is not None and self.loop != (self.from_ == self.to):
            raise ValueError(f"edge {self.id}: loop flag disagrees with its endpoints")
        return self

class TailRecord(BaseModel):
    id: str
    vertex: str
    nu: int

class GraphFile(BaseModel):
    vertices: List[str]
    edges: List[EdgeRecord] = []
    tails: List[TailRecord] = []
    infinity: List[str] = []

class ParamsFile(BaseModel):
    # x: branch label ("e", "-e", tail id) -> "p/q", "inf", number or [re, im]
    x: Dict[str, Any]
    # y: edge id -> multiplier; ignored by the series ring
    y: Dict[str, Any] = {}
    base: Optional[str] = None
    z0: Optional[Any] = None

# Validation Models
class ValidationIssue(BaseModel):
    field: str
    issue: str
    severity: str  # "critical", "warning", "info"

class GraphValidationReport(BaseModel):
    is_valid: bool
    genus: Optional[int] = None
    tails: Optional[int] = None
    issues: List[ValidationIssue]

# Period Models
class PeriodReport(BaseModel):
    ring: RingTag
    wordlen: int
    degree: Optional[int] = None
    base: str
    generators: List[str]
    paths: List[str]
    multipliers: List[Any]
    P: List[List[Any]]
    symmetric: Optional[bool] = None
    oracle_residuals: Optional[List[List[float]]] = None
    max_oracle_residual: Optional[float] = None
    a_cycle_residual: Optional[float] = None
    # "complete", "partial" (a generator fixes infinity) or None when not run
    schottky_check: Optional[str] = None

# Differential Models
class PoleRecord(BaseModel):
    at: Any
    order: int
    residue: Any

class ComponentTable(BaseModel):
    component: str
    poles: List[PoleRecord]
    matches_closed_form: Optional[bool] = None

class SampleValue(BaseModel):
    z: Any
    value: Any

class DifferentialReport(BaseModel):
    kind: str
    label: str
    components: List[ComponentTable]
    node_balance: Dict[str, Any] = {}
    balanced: Optional[bool] = None
    samples: List[SampleValue] = []

class DegenerateClass(BaseModel):
    vertices: List[str]
    differential: str
    poles: List[PoleRecord]

class DegenerateReport(BaseModel):
    edges: List[str]
    degenerated: bool
    classes: List[DegenerateClass]

# Invariant Models
class InvariantEntry(BaseModel):
    kind: str  # "multiplier", "cross_ratio", "fixed_point"
    item: str
    first: Any
    second: Any
    agrees: bool
    note: Optional[str] = None

class UnitRelation(BaseModel):
    relation: str
    leading: Any
    unit: bool

class InvariantReport(BaseModel):
    ring: RingTag
    max_length: int
    order: Optional[int] = None
    compared: int
    skipped: int = 0
    passed: bool
    discrepancies: List[InvariantEntry]
    entries: List[InvariantEntry]
    # split comparisons over series: the parameter relations of the degeneration
    unit_relations: List[UnitRelation] = []

# Eta basis and Gauss-Manin Models
class EtaReport(BaseModel):
    convention: str
    tail: str
    coefficients: List[List[Any]]
    system_determinant: Any
    vandermonde_ok: Optional[bool] = None
    normalisation_residual: Optional[float] = None

class GaussManinReport(BaseModel):
    step: float
    passed: bool
    eta_b_residual: float
    eta_a_residual: float
    omega_a_residual: float
    connection_residual: float
    tolerance: float

# KZ Models
class AssignmentReport(BaseModel):
    genus: int
    tails: int
    weight: int
    eliminated_tail: Optional[str] = None
    residues: Dict[str, Any]
    vertex_sums: Dict[str, Any]
    vertex_sums_vanish: bool
    antisymmetric: bool

class MonodromyReport(BaseModel):
    weight: int
    transport: Dict[str, Any]
    grouplike: bool
    extrapolation_residual: float

class MZVReport(BaseModel):
    indices: List[int]
    value: str
    digits: int

class RationalityEntry(BaseModel):
    word: List[str]
    coefficient: Any
    pi_i_part: Optional[str] = None  # Im(c)/pi
    pi2_part: Optional[str] = None  # Re(c)/pi^2, weight-2 words only
    rational: bool

class LimitReport(BaseModel):
    weight: int
    legs: int
    transport: Dict[str, Any]
    rationality: List[RationalityEntry]
    all_rational: bool

# Job Models
class JobConfig(BaseModel):
    command: str
    graph: Optional[str] = None
    params: Optional[str] = None
    ring: RingTag = "complex"
    settings: Settings = Settings()
    out: Optional[str] = None
    format: Literal["json", "csv"] = "json"

    @model_validator(mode="after")
    def _formal_cutoffs(self) -> "JobConfig":
        if self.ring == "series" and self.settings.wordlen < self.settings.degree:
            raise ValueError("formal jobs need wordlen >= degree")
        return self

# API request bodies
class PeriodsRequest(BaseModel):
    graph: GraphFile
    params: ParamsFile
    ring: RingTag = "complex"
    wordlen: Optional[int] = None
    degree: Optional[int] = None

class MZVRequest(BaseModel):
    indices: List[int]

class AssignmentRequest(BaseModel):
    graph: GraphFile
    weight: Optional[int] = None
    eliminated_tail: Optional[str] = None
