"""Reproduce the qualitative content of the six sensitivity figures.

Each preset file under demos/presets/ names one swept parameter and the
reported quantity; this script feeds them through the CLI so the exact same
invocation works standalone:

    alphamv sweep --config demos/configs/base.cfg --param alpha \
        --from 0.5 --to 1.0 --points 21 --quantity pi_q0 --out fig1.csv

Expected directions: the retained exposure falls with ambiguity attitude and
risk aversion; the stock amount rises with the drift; the bond amount rises
with the credit spread and falls with the default intensity.

Run:  python demos/02_figure_sweeps.py
"""

import pathlib

from alphamv.cli import main

HERE = pathlib.Path(__file__).parent
OUT = HERE / "output"
OUT.mkdir(exist_ok=True)
CONFIG = HERE / "configs" / "base.cfg"


def read_preset(path):
    values = {}
    for line in path.read_text().splitlines():
        body = line.split("#", 1)[0].strip()
        if body:
            key, _, value = body.partition("=")
            values[key.strip()] = value.strip()
    return values


for preset_path in sorted((HERE / "presets").glob("*.preset")):
    preset = read_preset(preset_path)
    out_csv = OUT / (preset_path.stem + ".csv")
    code = main([
        "sweep", "--config", str(CONFIG),
        "--param", preset["param"],
        "--from", preset["from"], "--to", preset["to"],
        "--points", preset["points"], "--quantity", preset["quantity"],
        "--out", str(out_csv),
    ])
    assert code == 0, f"sweep failed for {preset_path.name}"
    rows = out_csv.read_text().strip().split("\n")[1:]
    first = float(rows[0].split(",")[1])
    last = float(rows[-1].split(",")[1])
    direction = "falls" if last < first else "rises"
    print(f"{preset_path.stem:24s} {preset['quantity']} {direction}: "
          f"{first:9.4f} -> {last:9.4f}   ({out_csv.name})")
