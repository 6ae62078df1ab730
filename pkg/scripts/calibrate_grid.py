"""Regenerate ``src/zibeta/data/grid_intercepts.json``.

Intercepts are solved so the expected unsuitable / censored zero
fractions of each grid cell match their targets.
"""
import json
import pathlib

from zibeta.simgen import GRID_FAMILIES, calibrate_grid

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "zibeta" / "data" / "grid_intercepts.json"


def main():
    cal = {fam: calibrate_grid(fam) for fam in GRID_FAMILIES}
    OUT.write_text(json.dumps(cal, indent=1) + "\n")
    for fam, cells in cal.items():
        print(fam)
        for c in cells:
            print(f"  {c['unsuitable']:>3}/{c['censored']:<3} gamma0={c['gamma0']:+.4f} delta0={c['delta0']:+.4f}")


if __name__ == "__main__":
    main()
