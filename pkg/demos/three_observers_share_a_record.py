"""Three observers with different efficiencies track the same system.

One measurement apparatus, three parties reading shares of its output:
eta = 0.5, 0.3, 0.2. Each observer runs a Gaussian moment-closure
estimator on nothing but their own record and still pins the trajectory
to a few thousandths of a length unit. The full experiment driver does
this at production scale; here we run a short burst and print the summary.

Density-matrix replays are switched off to keep the demo quick; set
sme_replays=True to cross-check the Gaussian estimators against full
stochastic master equation integrations.
"""

import json
import tempfile

from qct import ExperimentConfig, run_duffing_experiment


def main() -> None:
    out = tempfile.mkdtemp(prefix="qct-demo-")
    config = ExperimentConfig(
        t_final=1.0,
        seed=11,
        sme_replays=False,
        output_dir=out,
    )
    bundle = run_duffing_experiment(config)

    widths = bundle.summary["widths"]
    errors = bundle.summary["error_std"]["gaussian"]
    records = bundle.summary["averaged_record"]
    floor = bundle.summary["filter_noise_floor"]

    print(f"truth (SSE, all records): rms width {widths['sse']['rms']:.2e}")
    print("\n  observer   est. width   est. error   filtered record   noise floor")
    for eta in config.etas:
        tag = f"eta{eta:g}"
        print(
            f"  eta={eta:<4}   {widths['gaussian'][tag]:.2e}     "
            f"{errors[tag]:.2e}     {records[tag]:.2e}          {floor[tag]:.2e}"
        )

    print("\nless efficient observers are strictly worse on every column,")
    print("but all three stay within an order of magnitude of the truth.")
    print(f"\nartifacts written to {out}:")
    for name in sorted(bundle.paths):
        print(f"  {name}: {bundle.paths[name].name}")
    print("\nsummary.json carries the same numbers:")
    print(json.dumps({"widths": widths["gaussian"]}, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
