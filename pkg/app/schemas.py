"""Pydantic schemas for input files, jobs and reports."""

from itertools import combinations
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

COMMANDS = ("verify", "cohomology", "cech", "milnor", "glue", "report")


# --- Input files ---
class ChartFile(BaseModel):
    """A based relative chart: polynomials are infix strings over the declared variables."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["chart"] = "chart"
    label: str = Field(..., min_length=1)
    fiber_vars: List[str]
    base_vars: List[str] = Field(default_factory=list)
    phi: List[str] = Field(default_factory=list)
    f: List[str] = Field(default_factory=list)
    codim: Optional[int] = Field(default=None, ge=0)
    # Localization: each g adjoins a fiber variable u with g*u - 1 in f
    invert: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def ensure_distinct_names(self):
        names = self.fiber_vars + self.base_vars
        if len(set(names)) != len(names):
            raise ValueError(f"variable names must be distinct: {names}")
        return self


class AtlasChartEntry(BaseModel):
    """One chart of an atlas: its coordinates as polynomials in the model variables."""

    model_config = ConfigDict(extra="forbid")

    map: List[str]
    vars: Optional[List[str]] = None


class AtlasFile(BaseModel):
    """Charts of a common model U with an explicit nerve (index sets with U_K nonempty)."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["atlas"] = "atlas"
    label: str = Field(..., min_length=1)
    model_vars: List[str]
    base_vars: List[str] = Field(default_factory=list)
    phi: List[str] = Field(default_factory=list)
    charts: List[AtlasChartEntry] = Field(default_factory=list)
    nerve: Optional[List[List[int]]] = None

    @model_validator(mode="after")
    def ensure_nerve(self):
        n = len(self.charts)
        if self.nerve is None:
            self.nerve = [list(K) for size in range(1, n + 1) for K in combinations(range(n), size)]
        members = {tuple(sorted(K)) for K in self.nerve if K}
        for K in members:
            if any(k < 0 or k >= n for k in K):
                raise ValueError(f"nerve element {list(K)} refers to a chart that does not exist")
            for size in range(1, len(K)):
                for face in combinations(K, size):
                    if face not in members:
                        raise ValueError(f"nerve is not closed under subsets: {list(face)} missing below {list(K)}")
        return self


# --- Jobs ---
class JobOptions(BaseModel):
    """Per-job overrides of the settings."""

    samples: int = Field(default=1000, ge=0)
    seed: int = 0
    pmax: Optional[int] = Field(default=None, ge=0)
    smax: Optional[int] = Field(default=None, ge=0)
    deg: int = Field(default=10, ge=0)
    vars: List[str] = Field(default_factory=list)


class JobSpec(BaseModel):
    """One CLI invocation."""

    command: Literal["verify", "cohomology", "cech", "milnor", "glue", "report"]
    inputs: List[str] = Field(default_factory=list)
    options: JobOptions = Field(default_factory=JobOptions)


# --- Reports ---
class CheckResult(BaseModel):
    """Verdict of one exact check."""

    name: str
    passed: bool
    detail: str = ""


class CohomologyRecord(BaseModel):
    """One H^{p,s} of a chart."""

    p: int
    s: int
    strip: bool
    ambient_rank: int
    generators: int
    relations: int
    zero: bool
    hilbert: List[int] = Field(default_factory=list)
    annihilator: List[str] = Field(default_factory=list)


class Counters(BaseModel):
    checks: int = 0
    failures: int = 0


class Report(BaseModel):
    """Structured result of one job; contains no timestamps."""

    command: str
    label: str
    inputs: List[str] = Field(default_factory=list)
    options: Dict[str, Any] = Field(default_factory=dict)
    counters: Counters = Field(default_factory=Counters)
    checks: List[CheckResult] = Field(default_factory=list)
    cohomology: List[CohomologyRecord] = Field(default_factory=list)
    sections: Dict[str, Any] = Field(default_factory=dict)

    def add_check(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(CheckResult(name=name, passed=passed, detail=detail))
        self.counters.checks += 1
        if not passed:
            self.counters.failures += 1

    @property
    def passed(self) -> bool:
        return self.counters.failures == 0
