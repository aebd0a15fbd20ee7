"""Example usage of RGN-CPD programmatically."""

from pathlib import Path

from src.rgn import ExperimentKind, ExperimentSpec, InsufficientDataError, SolverConfig
from src.rgn.cpd_model import Tensor, condition_number
from src.rgn.diagnostics import error_floor, estimate_order, random_unit_tangent
from src.rgn.experiments import ExperimentRunner, make_pencil
from src.rgn.manifold import retract
from src.rgn.solver import solve
from src.utils.io import load_config, save_trace_csv
from src.utils.logging import setup_logging
from src.utils.random import GaussianStream


def main():
    """Run example analysis."""
    print("=" * 60)
    print("RGN-CPD - Programmatic Example")
    print("=" * 60)
    print()

    # Setup logging
    setup_logging(level="INFO")

    # Load configuration
    config_path = Path(__file__).parent / "config.yml"
    config = load_config(str(config_path)) if config_path.exists() else {}

    # Step 1: condition numbers of the pencil family
    print("Step 1: Condition numbers of x(s)...")
    for s in (0, 1, 3, 5):
        kappa = condition_number(make_pencil(s).point).kappa
        print(f"  s={s}: kappa = {kappa:.2e}")
    print()

    # Step 2: one zero-residual solve from a perturbed start
    print("Step 2: Solving A(1) from a perturbed start...")
    pencil = make_pencil(1)
    stream = GaussianStream(0)
    x0 = retract(pencil.point, random_unit_tangent(pencil.point, stream).scaled(1e-3))
    _, trace = solve(pencil.tensor, x0, SolverConfig(record_reference=pencil.point))
    print(f"✓ {trace.status.value} after {len(trace.records)} records")
    for rec in trace.records:
        print(f"    iter {rec.iter}: error {rec.error:.3e}, residual {rec.residual:.3e}")
    try:
        order, _ = estimate_order(trace, error_floor(pencil.point))
        print(f"  Fitted order: {order:.2f}")
    except InsufficientDataError as e:
        print(f"  No order fit: {e}")
    print()

    # Step 3: same start against a perturbed target
    print("Step 3: Solving a perturbed target...")
    target = Tensor(shape=pencil.tensor.shape, data=pencil.tensor.data + 1e-6 * stream.unit_vector(27))
    x_star, noisy = solve(target, x0, SolverConfig(grad_tol=1e-16))
    print(f"✓ {noisy.status.value}; kappa(x*) = {condition_number(x_star).kappa:.2e}")
    print()

    # Step 4: the random perturbation experiment
    print("Step 4: Random perturbation experiment...")
    runner = ExperimentRunner(config)
    spec = ExperimentSpec(kind=ExperimentKind.RANDOM, s_values=[0, 1, 3], seed=0)
    runs = runner.run(spec)
    for run in runs:
        r = run.result
        rate = f"{r.fitted_rate:.3e}" if r.fitted_rate is not None else "-"
        print(f"  s={r.s}: kappa* = {r.kappa_star:.2e}, fitted rate = {rate}")
    print()

    # Save outputs
    print("Saving outputs...")
    output_dir = Path("output")
    output_dir.mkdir(exist_ok=True)

    save_trace_csv(trace, str(output_dir / "example_trace.csv"))
    print(f"✓ Trace: {output_dir / 'example_trace.csv'}")

    runner.write(runs, str(output_dir / "experiment"), spec)
    print(f"✓ Experiment artifacts: {output_dir / 'experiment'}")

    print()
    print("=" * 60)
    print("Example complete!")
    print("=" * 60)


if __name__ == "__main__":
    main()
