"""Map out where a measured double well looks classical.

The regime analyzer evaluates three inequality families at a typical
phase-space point: localization (the conditioned packet is small on the
scale the force varies), low noise (measurement back-action and record
noise do not disturb the trajectory), and faithful tracking (the
filtered record resolves the motion). All margins must hold by a
comfortable factor for a "classical" verdict.

We sweep hbar and the measurement strength k across ten orders of
magnitude and print the verdict grid, then show the full report at the
physical corner. Instant.
"""

from qct import ExperimentConfig, analyze_regime

HBARS = (1e-5, 1e-3, 1e-1, 1.0)
KS = (1e-2, 1e1, 1e3, 1e5)

MARK = {"classical": "C", "marginal": "m", "non-classical": "."}


def main() -> None:
    print("verdict grid (C classical, m marginal, . non-classical)\n")
    print("              k = " + "".join(f"{k:>9.0e}" for k in KS))
    for hbar in HBARS:
        row = []
        for k in KS:
            report = analyze_regime(ExperimentConfig(hbar=hbar, k=k))
            row.append(MARK[report.verdict])
        print(f"  hbar = {hbar:7.0e}   " + "".join(f"{c:>9}" for c in row))

    print("\nsmall hbar alone is not enough: measure too weakly and the")
    print("packet delocalizes, too strongly and back-action heats the motion.")

    report = analyze_regime(ExperimentConfig())
    print(f"\nfull report at hbar=1e-5, k=1e5 (verdict: {report.verdict})")
    width = max(len(name) for name in report.margins)
    for name, margin in report.margins.items():
        status = {True: "ok", False: "violated", None: "n/a"}[margin.satisfied]
        extra = "" if margin.required else " (advisory)"
        print(f"  {name:<{width}}  factor {margin.factor:9.2e}  {status}{extra}")


if __name__ == "__main__":
    main()
