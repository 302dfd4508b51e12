from enum import StrEnum

from pydantic import BaseModel, Field, computed_field


class GradCheckReport(BaseModel):
    op_name: str
    max_rel_err: float
    param_count: int
    tolerance: float

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance


class NoiseGroup(StrEnum):
    SEEN = "seen"
    UNSEEN = "unseen"


METRIC_COLUMNS = ("estoi_noisy", "estoi_enhanced", "si_sdr_noisy", "si_sdr_enhanced")
REPORT_HEADER = "group\tnoise\t" + "\t".join(f"{column}\t{column}_std" for column in METRIC_COLUMNS)
AVERAGE_ROW = "AVE"


class ItemScore(BaseModel):
    item_id: str
    noise: str
    group: NoiseGroup
    snr_db: int
    estoi_noisy: float = Field(ge=-1.0, le=1.0)
    estoi_enhanced: float = Field(ge=-1.0, le=1.0)
    si_sdr_noisy: float
    si_sdr_enhanced: float


class MetricStats(BaseModel):
    """Mean and standard deviation of the four report columns over a set of items or runs."""

    count: int
    mean: dict[str, float]
    std: dict[str, float]


class ReportRow(BaseModel):
    """Column means; `std` holds the spread over the items (noise rows) or noise rows (AVE rows) averaged."""

    group: NoiseGroup
    noise: str
    estoi_noisy: float
    estoi_enhanced: float
    si_sdr_noisy: float
    si_sdr_enhanced: float
    std: dict[str, float] = Field(default_factory=lambda: dict.fromkeys(METRIC_COLUMNS, 0.0))

    def cell(self, column: str) -> str:
        return f"{getattr(self, column):.2f} ± {self.std[column]:.2f}"

    def to_tsv(self) -> str:
        values = "\t".join(f"{getattr(self, column):.2f}\t{self.std[column]:.2f}" for column in METRIC_COLUMNS)
        return f"{self.group.value}\t{self.noise}\t{values}"


class SnrAggregate(BaseModel):
    noise: str
    snr_db: int
    stats: MetricStats


class MetricReport(BaseModel):
    items: list[ItemScore]
    rows: list[ReportRow]
    by_snr: list[SnrAggregate]
    missing: list[str] = []

    def average_rows(self) -> list[ReportRow]:
        return [row for row in self.rows if row.noise == AVERAGE_ROW]

    def to_tsv(self) -> str:
        return "\n".join([REPORT_HEADER, *(row.to_tsv() for row in self.rows)]) + "\n"


class RunSummaryRow(BaseModel):
    group: NoiseGroup
    noise: str
    stats: MetricStats
