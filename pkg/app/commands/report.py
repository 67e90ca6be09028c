"""report: aggregate the JSON reports of a directory into text, Excel and PDF summaries."""

from pathlib import Path

from app.schemas import JobSpec, Report
from app.utils.errors import SpecError
from app.utils.export_results import write_summary


def register(subparsers) -> None:
    parser = subparsers.add_parser("report", help="summarize a directory of reports")
    parser.add_argument("dir", help="directory holding *.json reports")
    parser.set_defaults(handler=run, inputs=("dir",), emit=False)


def run(job: JobSpec, settings) -> Report:
    directory = job.inputs[0]
    if not Path(directory).is_dir():
        raise SpecError(f"no such directory: {directory}")
    return write_summary(directory)
