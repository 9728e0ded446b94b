"""Runs the CLI on small configs and validates every meta.json against docs/meta.schema.json."""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema

CONFIGS = {
    "run_pca": ("run", "problem.kind = pca\nproblem.n = 12\nproblem.p = 3\nsolver.r = 4\nsolver.max_iters = 50\nrepeats = 2\n"),
    "run_exact": ("run", "problem.kind = procrustes\nproblem.n = 5\nproblem.p = 2\nsolver.family = rsdm-exact\n"
                         "solver.sampler = exhaustive\nsolver.r = 2\nsolver.max_iters = 3\nsolver.eta = 0.01\n"),
    "run_rgd_ignored": ("run", "problem.kind = qap\nproblem.n = 6\nsolver.family = rgd\nsolver.r = 3\nsolver.beta = 0.2\n"
                               "solver.eta = 0.001\nsolver.max_iters = 20\n"),
    "sweep_eta": ("sweep", "problem.kind = pca\nproblem.n = 10\nproblem.p = 2\nsolver.max_iters = 20\n"),
}


def main(cli: str, schema_path: str) -> int:
    schema = json.loads(pathlib.Path(schema_path).read_text())
    validator = jsonschema.Draft202012Validator(schema)
    failures = 0
    with tempfile.TemporaryDirectory() as tmp:
        for name, (command, text) in CONFIGS.items():
            conf = pathlib.Path(tmp) / f"{name}.conf"
            out = pathlib.Path(tmp) / name
            conf.write_text(text + f"output_dir = {out}\n")
            args = [cli, command, str(conf)]
            if command == "sweep":
                args += ["--param", "eta", "--values", "0.1,0.2"]
            subprocess.run(args, check=True, stdout=subprocess.DEVNULL)
            meta = json.loads((out / "meta.json").read_text())
            errors = sorted(validator.iter_errors(meta), key=lambda e: list(e.path))
            for e in errors:
                print(f"{name}: {'/'.join(map(str, e.path))}: {e.message}")
            failures += len(errors)
            print(f"{name}: {'ok' if not errors else 'INVALID'}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1], sys.argv[2]))
