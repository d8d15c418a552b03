# src/work_fluctuations/inversion/reconstruct.py

from work_fluctuations.data.measure import Dataset
from work_fluctuations.inversion.projection import InversionReport, mle_project
from work_fluctuations.inversion.system import build_system, complete_matrix, solve_least_squares
from work_fluctuations.models.hilbert import SpectrumTable


def invert_pipeline(
    ds: Dataset,
    spec: SpectrumTable,
    direction: str = "forward",
    tol: float = 1e-6,
    max_iter: int = 1000,
    allow_rank_deficient: bool = False,
    verbose: bool = True,
) -> InversionReport:
    """
    build_system -> solve_least_squares -> complete_matrix -> mle_project,
    keeping the least-squares diagnostics on the report.
    """
    system = build_system(ds, spec, direction=direction)
    solution = solve_least_squares(system, allow_rank_deficient=allow_rank_deficient)
    raw = complete_matrix(solution.x)

    report = mle_project(raw, tol=tol, max_iter=max_iter, direction=direction)
    report.raw_solution = solution.x
    report.residual = solution.residual
    report.rank = solution.rank
    report.condition_number = solution.condition_number
    report.flags = list(solution.flags) + report.flags
    if system.uninformative:
        report.flags.append("uninformative_rows")

    if verbose:
        print(f"[invert] {direction}: rank {solution.rank}, cond {solution.condition_number:.2e}, "
              f"residual {solution.residual:.2e}, {report.iterations} MLE iterations")
    return report
