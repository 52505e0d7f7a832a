"""Computing-cost accounting: GPU hours, memory, energy, carbon, throughput.

Ingests CSV resource logs (timestamp, gpu_id, power_w, mem_gb) produced by
any external GPU monitor and derives the run-cost metrics. Collection is
out of scope; arithmetic is the whole job here.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

CARBON_KG_PER_KWH = 0.39

CSV_HEADER = ["timestamp", "gpu_id", "power_w", "mem_gb"]


class NoSamplesError(ValueError):
    pass


class ZeroNotesError(ValueError):
    pass


@dataclass(frozen=True)
class ResourceSample:
    timestamp: float  # seconds, any monotone epoch
    gpu_id: str
    power_w: float
    mem_gb: float

    def __post_init__(self) -> None:
        if self.power_w < 0 or self.mem_gb < 0:
            raise ValueError("power and memory must be >= 0")


@dataclass(frozen=True)
class RunLedger:
    phase: str  # "train" | "inference"
    num_gpus: int
    wall_seconds: float
    notes_processed: int
    samples: tuple[ResourceSample, ...] = ()
    epochs: int | None = None  # train only

    def __post_init__(self) -> None:
        if self.phase not in {"train", "inference"}:
            raise ValueError(f"phase must be train or inference, got {self.phase!r}")
        if self.num_gpus < 1:
            raise ValueError("num_gpus must be >= 1")
        if self.wall_seconds <= 0:
            raise ValueError("wall_seconds must be > 0")
        if self.notes_processed < 0:
            raise ValueError("notes_processed must be >= 0")
        object.__setattr__(self, "samples", tuple(self.samples))
        last_t: dict[str, float] = {}
        for s in self.samples:
            if s.gpu_id in last_t and s.timestamp < last_t[s.gpu_id]:
                raise ValueError(f"timestamps not monotone for gpu {s.gpu_id}")
            last_t[s.gpu_id] = s.timestamp


def read_samples_csv(text: str) -> tuple[ResourceSample, ...]:
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r]
    if not rows or [c.strip() for c in rows[0]] != CSV_HEADER:
        raise ValueError(f"expected header {','.join(CSV_HEADER)}")
    return tuple(
        ResourceSample(float(t), g.strip(), float(p), float(m))
        for t, g, p, m in rows[1:]
    )


def write_samples_csv(samples: tuple[ResourceSample, ...]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for s in samples:
        writer.writerow([s.timestamp, s.gpu_id, s.power_w, s.mem_gb])
    return buf.getvalue()


def gpu_hours(ledger: RunLedger) -> float:
    """num_gpus x wall time in hours."""
    return ledger.num_gpus * ledger.wall_seconds / 3600.0


def _by_gpu(ledger: RunLedger) -> dict[str, list[ResourceSample]]:
    groups: dict[str, list[ResourceSample]] = {}
    for s in ledger.samples:
        groups.setdefault(s.gpu_id, []).append(s)
    return groups


def energy_kwh(ledger: RunLedger, method: str = "mean") -> float:
    """Total energy over the run.

    "mean" (default): per-GPU arithmetic mean power x wall hours, summed.
    "trapezoid": time-weighted integral over each GPU's sample timeline.
    """
    groups = _by_gpu(ledger)
    if not groups:
        raise NoSamplesError("ledger has no power samples")
    wall_hours = ledger.wall_seconds / 3600.0
    total = 0.0
    if method == "mean":
        for samples in groups.values():
            mean_w = sum(s.power_w for s in samples) / len(samples)
            total += mean_w / 1000.0 * wall_hours
    elif method == "trapezoid":
        for samples in groups.values():
            if len(samples) == 1:
                total += samples[0].power_w / 1000.0 * wall_hours
                continue
            joules = 0.0
            for a, b in zip(samples, samples[1:]):
                joules += (a.power_w + b.power_w) / 2.0 * (b.timestamp - a.timestamp)
            total += joules / 3.6e6  # J -> kWh
    else:
        raise ValueError(f"unknown energy method {method!r}")
    return total


def carbon_kg(energy: float) -> float:
    """Grid conversion at 0.39 kg CO2 per kWh, exact before any rounding."""
    if energy < 0:
        raise ValueError("energy must be >= 0")
    return energy * CARBON_KG_PER_KWH


def seconds_per_note(wall_seconds: float, notes: int) -> float:
    if notes <= 0:
        raise ZeroNotesError("cannot average over zero notes")
    return wall_seconds / notes


def avg_memory_gb(ledger: RunLedger) -> float:
    """Mean of per-sample memory per GPU, averaged across GPUs."""
    groups = _by_gpu(ledger)
    if not groups:
        raise NoSamplesError("ledger has no memory samples")
    per_gpu = [
        sum(s.mem_gb for s in samples) / len(samples)
        for samples in groups.values()
    ]
    return sum(per_gpu) / len(per_gpu)


@dataclass(frozen=True)
class CostReport:
    phase: str
    gpu_hours: float
    gpu_hours_per_epoch: float | None
    avg_memory_gb: float | None
    energy_kwh: float | None
    carbon_kg: float | None
    seconds_per_note: float | None


def cost_report(ledger: RunLedger, energy_method: str = "mean") -> CostReport:
    """All metrics a ledger supports; sample-derived fields are None when
    the ledger carries no samples, per-note throughput None at 0 notes."""
    hours = gpu_hours(ledger)
    per_epoch = None
    if ledger.phase == "train" and ledger.epochs:
        per_epoch = hours / ledger.epochs
    if ledger.samples:
        energy = energy_kwh(ledger, method=energy_method)
        carbon = carbon_kg(energy)
        memory = avg_memory_gb(ledger)
    else:
        energy = carbon = memory = None
    spn = (
        seconds_per_note(ledger.wall_seconds, ledger.notes_processed)
        if ledger.notes_processed > 0
        else None
    )
    return CostReport(
        phase=ledger.phase,
        gpu_hours=hours,
        gpu_hours_per_epoch=per_epoch,
        avg_memory_gb=memory,
        energy_kwh=energy,
        carbon_kg=carbon,
        seconds_per_note=spn,
    )


def report_to_dict(report: CostReport) -> dict:
    return {
        "phase": report.phase,
        "gpu_hours": report.gpu_hours,
        "gpu_hours_per_epoch": report.gpu_hours_per_epoch,
        "avg_memory_gb": report.avg_memory_gb,
        "energy_kwh": report.energy_kwh,
        "carbon_kg": report.carbon_kg,
        "seconds_per_note": report.seconds_per_note,
    }


def report_from_dict(data: dict) -> CostReport:
    return CostReport(
        phase=data["phase"],
        gpu_hours=data["gpu_hours"],
        gpu_hours_per_epoch=data["gpu_hours_per_epoch"],
        avg_memory_gb=data["avg_memory_gb"],
        energy_kwh=data["energy_kwh"],
        carbon_kg=data["carbon_kg"],
        seconds_per_note=data["seconds_per_note"],
    )


def report_to_json(report: CostReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"


def report_to_text(report: CostReport) -> str:
    def cell(value: float | None, digits: int = 2) -> str:
        return "-" if value is None else f"{value:.{digits}f}"

    rows = [
        ("phase", report.phase),
        ("gpu_hours", cell(report.gpu_hours)),
        ("gpu_hours_per_epoch", cell(report.gpu_hours_per_epoch)),
        ("avg_memory_gb", cell(report.avg_memory_gb)),
        ("energy_kwh", cell(report.energy_kwh)),
        ("carbon_kg", cell(report.carbon_kg)),
        ("seconds_per_note", cell(report.seconds_per_note, 1)),
    ]
    return "\n".join(f"{k:<22}{v}" for k, v in rows)
