"""Measure the raw audit maxima on the reference benchmarks and freeze them (x MARGIN).

    python3 scripts/calibrate.py            # print only
    python3 scripts/calibrate.py --write    # rewrite src/degdelay/calibration.json
"""
import argparse
import json

from degdelay import calibration as cal


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--write", action="store_true")
    args = ap.parse_args()

    carl = cal.carleman_benchmark()
    l42 = cal.lem42_benchmark()
    energy = cal.energy_benchmark()
    est = cal.estimate_benchmark()
    dts = {M: cal.ENERGY_BENCH["T"] / M for M in energy}
    c_e = max(v / dts[M] for M, v in energy.items())
    raw = {"C_cal": carl.max_ratio, "C_cal42": l42.max_ratio, "C_E": c_e, "C_estimate": est}
    out = {
        "margin": cal.MARGIN,
        "raw": raw,
        "frozen": {k: v * cal.MARGIN for k, v in raw.items()},
        "benchmarks": {"carleman": cal.CARLEMAN_BENCH, "lem42": cal.LEM42_BENCH, "energy": cal.ENERGY_BENCH,
                       "estimate": cal.ESTIMATE_BENCH},
        "skipped": {"carleman": carl.skipped, "lem42": l42.skipped},
    }
    text = json.dumps(out, sort_keys=True, indent=2) + "\n"
    print(text)
    if args.write:
        cal.PATH.write_text(text)
        print(f"wrote {cal.PATH}")


if __name__ == "__main__":
    main()
