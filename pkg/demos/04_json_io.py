"""Round trip through the JSON format read by `sego solve`."""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from sego.synth import ScenarioConfig, generate_scene

scene = generate_scene(ScenarioConfig(), "S2P-1P", np.random.default_rng(9))
with tempfile.TemporaryDirectory() as d:
    src = Path(d) / "features.json"
    src.write_text(json.dumps({"features": [f.to_dict() for f in scene.features]}, indent=1))
    out = subprocess.run([sys.executable, "-m", "sego.cli", "solve", "--input", str(src), "--solver", "ppsego"],
                         capture_output=True, text=True, check=True).stdout
res = json.loads(out)
print("case", res["case"], "solved by", res["solver"], "with", len(res["poses"]), "candidates")
err = min(np.linalg.norm(np.array(p["t"]) - scene.pose.t) for p in res["poses"])
print("closest translation differs from the truth by %.1e" % err)
