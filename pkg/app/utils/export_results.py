"""Write job reports (JSON + text table) and export report summaries to Excel and PDF."""

import io
import logging
import re
from pathlib import Path
from typing import List, Tuple

from reportlab.lib import colors
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import getSampleStyleSheet
from reportlab.lib.units import mm
from reportlab.platypus import Paragraph, SimpleDocTemplate, Table, TableStyle

from app.schemas import Report

logger = logging.getLogger(__name__)

SUMMARY_HEADERS = ["Command", "Label", "Checks", "Failures", "Status"]


def report_stem(report: Report) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", f"{report.command}_{report.label}")


def render_text(report: Report) -> str:
    """Human-readable table mirroring the structured report."""
    lines = [
        f"{report.command} {report.label}",
        f"checks: {report.counters.checks}  failures: {report.counters.failures}",
        "",
    ]
    if report.checks:
        width = max(len(c.name) for c in report.checks)
        for c in report.checks:
            status = "ok" if c.passed else "FAIL"
            lines.append(f"  {c.name:<{width}}  {status:<4}  {c.detail}".rstrip())
        lines.append("")
    if report.cohomology:
        lines.append("   p   s  strip  gens  rels  zero  hilbert")
        for r in report.cohomology:
            hilbert = ",".join(str(v) for v in r.hilbert)
            lines.append(
                f"  {r.p:>2}  {r.s:>2}  {str(r.strip):<5}  {r.generators:>4}  {r.relations:>4}  {str(r.zero):<5} {hilbert}"
            )
        lines.append("")
    for name, value in report.sections.items():
        lines.append(f"[{name}]")
        if isinstance(value, dict):
            for k, v in value.items():
                lines.append(f"  {k}: {v}")
        elif isinstance(value, list):
            lines.extend(f"  {v}" for v in value)
        else:
            lines.append(f"  {value}")
    return "\n".join(lines).rstrip() + "\n"


def emit_report(report: Report, out_dir: str) -> Tuple[Path, Path]:
    """One JSON file and one text table per job; equal reports give identical bytes."""
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    stem = report_stem(report)
    json_path = directory / f"{stem}.json"
    text_path = directory / f"{stem}.txt"
    json_path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    text_path.write_text(render_text(report), encoding="utf-8")
    logger.info("wrote %s and %s", json_path, text_path)
    return json_path, text_path


def load_reports(directory: str) -> List[Report]:
    paths = sorted(Path(directory).glob("*.json"))
    reports = []
    for path in paths:
        try:
            reports.append(Report.model_validate_json(path.read_text(encoding="utf-8")))
        except ValueError:
            logger.warning("skipping %s: not a report", path.name)
    return reports


def _summary_rows(reports: List[Report]) -> List[List]:
    return [
        [r.command, r.label, r.counters.checks, r.counters.failures, "pass" if r.passed else "FAIL"]
        for r in reports
    ]


def export_summary_excel(reports: List[Report]) -> Tuple[io.BytesIO, str]:
    """Summary workbook (xlsx) using openpyxl; returns the buffer and its file suffix."""
    try:
        from openpyxl import Workbook
        from openpyxl.styles import Font
    except ImportError:
        # Fallback: create CSV if openpyxl not installed
        buffer = io.BytesIO()
        lines = [",".join(SUMMARY_HEADERS)]
        for row in _summary_rows(reports):
            lines.append(",".join(str(v) for v in row))
        buffer.write("\n".join(lines).encode("utf-8"))
        buffer.seek(0)
        return buffer, ".csv"

    wb = Workbook()
    ws = wb.active
    ws.title = "Reports"
    header_font = Font(bold=True)
    ws.append(SUMMARY_HEADERS)
    for cell in ws[1]:
        cell.font = header_font
    for row in _summary_rows(reports):
        ws.append(row)

    records = wb.create_sheet("Cohomology")
    records.append(["Label", "p", "s", "Strip", "Generators", "Relations", "Zero", "Hilbert"])
    for cell in records[1]:
        cell.font = header_font
    for r in reports:
        for c in r.cohomology:
            records.append([r.label, c.p, c.s, c.strip, c.generators, c.relations, c.zero, ",".join(map(str, c.hilbert))])

    buffer = io.BytesIO()
    wb.save(buffer)
    buffer.seek(0)
    return buffer, ".xlsx"


def export_summary_pdf(reports: List[Report], title: str = "kdr reports") -> io.BytesIO:
    """Summary table as PDF using ReportLab."""
    buffer = io.BytesIO()
    doc = SimpleDocTemplate(buffer, pagesize=A4, topMargin=15 * mm, bottomMargin=15 * mm, invariant=1)
    styles = getSampleStyleSheet()
    elements = [Paragraph(f"<b>{title}</b>", styles["Title"])]
    total = sum(r.counters.checks for r in reports)
    failed = sum(r.counters.failures for r in reports)
    elements.append(Paragraph(f"{len(reports)} reports, {total} checks, {failed} failures", styles["Normal"]))
    elements.append(Paragraph("<br/>", styles["Normal"]))

    data = [SUMMARY_HEADERS] + [[str(v) for v in row] for row in _summary_rows(reports)]
    table = Table(data)
    table.setStyle(
        TableStyle(
            [
                ("BACKGROUND", (0, 0), (-1, 0), colors.HexColor("#1e3a5f")),
                ("TEXTCOLOR", (0, 0), (-1, 0), colors.white),
                ("FONTNAME", (0, 0), (-1, 0), "Helvetica-Bold"),
                ("FONTSIZE", (0, 0), (-1, 0), 10),
                ("BOTTOMPADDING", (0, 0), (-1, 0), 8),
                ("FONTSIZE", (0, 1), (-1, -1), 9),
                ("GRID", (0, 0), (-1, -1), 0.5, colors.grey),
                ("ROWBACKGROUNDS", (0, 1), (-1, -1), [colors.white, colors.HexColor("#f8fafc")]),
            ]
        )
    )
    elements.append(table)
    doc.build(elements)
    buffer.seek(0)
    return buffer


def write_summary(directory: str) -> Report:
    """Aggregate every JSON report of a directory into summary.txt, summary.xlsx and summary.pdf."""
    reports = load_reports(directory)
    summary = Report(command="report", label=Path(directory).name or "reports", inputs=[directory])
    for r in reports:
        summary.add_check(report_stem(r), r.passed, f"{r.counters.failures}/{r.counters.checks} failed")
    base = Path(directory)
    lines = [" | ".join(SUMMARY_HEADERS)] + [" | ".join(str(v) for v in row) for row in _summary_rows(reports)]
    (base / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    workbook, suffix = export_summary_excel(reports)
    (base / f"summary{suffix}").write_bytes(workbook.getvalue())
    (base / "summary.pdf").write_bytes(export_summary_pdf(reports).getvalue())
    logger.info("summarized %d reports in %s", len(reports), directory)
    return summary
