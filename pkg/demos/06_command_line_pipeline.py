"""
The command-line pipeline: run, oracle, analyze
===============================================

Everything the library does is reachable from the shelvesim command in
three steps: simulate an ensemble to an emissions CSV, write the scheme's
reference telegraph rates, and analyze the CSV against them. All artifacts
are plain text; reruns with the same inputs are byte-identical.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

# A scheme file is key = value lines; omitted keys take their defaults.
SCHEME = """\
config = V
gamma_strong = 1.0
gamma_weak = 0.005
omega_strong = 0.3
omega_weak = 0.002
rabi_onset = immediate
"""


def shelvesim(*args):
    cmd = [sys.executable, "-m", "shelvesim.cli", *map(str, args)]
    print("$", "shelvesim", " ".join(map(str, args)))
    proc = subprocess.run(cmd, capture_output=True, text=True, check=True)
    if proc.stdout:
        print(proc.stdout.rstrip())
    return proc


with tempfile.TemporaryDirectory() as tmp:
    work = Path(tmp)
    (work / "scheme.cfg").write_text(SCHEME)

    # Step 1: simulate. Writes emissions.csv plus a manifest.json recording
    # the scheme text, its hash, and the run parameters.
    out = work / "run"
    shelvesim("run", "--scheme", work / "scheme.cfg", "--trajectories", 10,
              "--t-max", 1.0e6, "--seed", 0, "--out", out)
    manifest = json.loads((out / "manifest.json").read_text())
    print("manifest scheme hash:", manifest["scheme_hash"])

    # Step 2: the oracle's three predicted rates, as JSON named after the
    # scheme hash so an analyze step can't pair it with the wrong run.
    shelvesim("oracle", "--scheme", work / "scheme.cfg", "--out", out)
    oracle_path = next(out.glob("oracle_*.json"))

    # Step 3: analyze the emissions against the oracle. The report carries
    # pass/fail checks; the exit code stays 0 either way so pipelines can
    # collect the report and decide for themselves.
    shelvesim("analyze", "--emissions", out / "emissions.csv",
              "--oracle", oracle_path, "--gap-threshold", 150)

    # The analyze step already echoed its checks; the same content lives in
    # report.json for machine consumption.
    report = json.loads((out / "report.json").read_text())
    print("\nreport pass :", report["pass"])
    print("dark periods:", report["dark"]["count"],
          "| strong tail samples:", report["waiting_fits"]["strong"]["n_samples"])
    print("files       :", sorted(p.name for p in out.iterdir()))
