"""The bundled corpus: machine and problem documents plus a manifest of
reference values, each tagged with how it was obtained."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from ..machine import emit_machine, machine_from_dict, machine_to_dict, pair
from . import builders as b

CORPUS_ENV = "QOPTLAB_CORPUS"
MANIFEST = "manifest.json"
SIGNIFICANT = 12
REGEN_TOL = 1e-9


def package_corpus():
    return Path(__file__).resolve().parent / "data"


def corpus_root():
    env = os.environ.get(CORPUS_ENV)
    return Path(env) if env else package_corpus()


def round_sig(x, digits=SIGNIFICANT):
    x = float(x)
    if x == 0:
        return 0.0
    return float(f"{x:.{digits - 1}e}")


@dataclass
class Reference:
    quantity: str
    input: str
    value: float
    provenance: str
    command: str

    def to_dict(self):
        return {
            "quantity": self.quantity,
            "input": self.input,
            "value": round_sig(self.value),
            "provenance": self.provenance,
            "command": self.command,
        }


def _problem_doc(machine, index_size, steps, oracle=None):
    doc = {
        "machine": machine_to_dict(machine),
        "indexSize": index_size,
        "steps": steps,
        "inputRule": {
            "outputTape": machine.io.output_tape,
            "xOffset": machine.io.x_offset,
            "indexOffset": machine.io.index_offset,
        },
    }
    if oracle is not None:
        doc["oracle"] = sorted(oracle)
    return doc


def _source_doc(machine, steps, qubits):
    return {"machine": machine_to_dict(machine), "steps": steps, "qubits": qubits}


def build_documents():
    """``{name: (kind, document, extra)}`` for every corpus entry.

    ``extra`` holds the inputs and analytic values used for references.
    """
    docs = {}
    docs["identity"] = ("machine", machine_to_dict(b.identity_machine()), {"steps": 1, "inputs": {"0": 0.0, "1": 1.0}})
    docs["always-accept"] = ("machine", machine_to_dict(b.always_accept_machine()), {"steps": 1, "inputs": {"0": 1.0, "01": 1.0}})
    docs["coin"] = ("machine", machine_to_dict(b.coin_flip_machine()), {"steps": 2, "inputs": {"0": 0.5, "1": 0.5}})
    docs["two-tape"] = ("machine", machine_to_dict(b.two_tape_accept_machine()), {"steps": 1, "inputs": {"1": 1.0}})
    docs["oracle"] = (
        "machine",
        machine_to_dict(b.oracle_machine()),
        {"steps": 5, "oracle": ["1"], "inputs": {"0": 0.0, "1": 1.0}},
    )
    docs["bad-separability"] = ("machine", machine_to_dict(b.bad_separability_machine()), {"steps": 0, "inputs": {}})
    docs["projector"] = ("problem", _problem_doc(b.projector_witness(), 1, 1), {"inputs": {"0": 1.0, "1": 1.0}})
    docs["hadamard-sandwich"] = ("problem", _problem_doc(b.hadamard_sandwich_witness(), 1, 1), {"inputs": {"0": 1.0}})
    for v in (0.25, 0.5, 0.75):
        docs[f"index-ignoring-{v}"] = (
            "problem",
            _problem_doc(b.index_ignoring_witness(v), 1, 1),
            {"inputs": {"0": v, "1": v}},
        )
    fam, t = b.family_witness({"0": 0.2, "1": 0.6})
    docs["family-max"] = (
        "problem",
        _problem_doc(fam, 1, t),
        {"inputs": {pair("1", "0"): 0.2, pair("1", "1"): 0.6}},
    )
    fam2, t2 = b.family_witness({"00": 0.9, "01": 0.8, "10": 0.7, "11": 0.6})
    docs["family-product"] = (
        "problem",
        _problem_doc(fam2, 1, t2),
        {"inputs": {pair("1", y): v for y, v in zip(("00", "01", "10", "11"), (0.9, 0.8, 0.7, 0.6))}},
    )
    look, t3 = b.lookup_witness({"00": 0.3, "01": 0.5, "10": 0.7, "11": 0.9})
    docs["lookup"] = (
        "problem",
        _problem_doc(look, 1, t3),
        {"inputs": {"00": 0.3, "01": 0.5, "10": 0.7, "11": 0.9}},
    )
    bell, t4 = b.bell_witness({"00": 1.0, "01": 0.25})
    docs["bell"] = ("problem", _problem_doc(bell, 2, t4), {"inputs": {"": 1.0}, "factors": [1, 1]})
    for name, amps in b.SOURCE_AMPLITUDES.items():
        docs[f"source-{name}"] = (
            "source",
            _source_doc(b.source_machine(amps), 1, 1),
            {"inputs": {"1": [amps[0] ** 2, amps[1] ** 2]}},
        )
    return docs


def _trivial(name):
    return name in {"identity", "always-accept", "two-tape", "projector", "oracle"} or name.startswith(
        ("index-ignoring", "source-")
    )


def compute_references(name, kind, doc, extra):
    """Recompute every reference value for one corpus entry."""
    from ..evolution import run
    from ..machine import encode_input
    from ..qopt import problem_from_dict, solve_opt, window_for
    from ..wellformedness import check_global_unitarity, local_conditions_pass

    refs = []
    tag = "TRIVIAL: analytic" if _trivial(name) else None
    if kind == "machine":
        m = machine_from_dict(doc)
        refs.append(Reference("localWellFormed", "", float(local_conditions_pass(m)), "DERIVED: local conditions", f"qoptlab check {name}.json"))
        if m.oracle is None:
            gl = check_global_unitarity(m).passed
            refs.append(Reference("globalUnitary", "", float(gl), "DERIVED: assembled operator on T=5", f"qoptlab check {name}.json --global"))
        steps = extra["steps"]
        oracle = frozenset(extra.get("oracle", ())) or None
        for x in extra["inputs"]:
            vec = encode_input(m, x, windows=window_for(m, x, 0, steps))
            val = run(m, vec, steps, oracle).accept_probability
            cmd = f"qoptlab run {name}.json --input {x} --steps {steps}"
            if oracle:
                cmd += " --oracle oracle-set.json"
            refs.append(Reference("acceptance", x, val, tag or "DERIVED: state-vector simulation", cmd))
    elif kind == "problem":
        prob = problem_from_dict(doc)
        for x in extra["inputs"]:
            val = solve_opt(prob, x)
            refs.append(
                Reference(
                    "lambdaMax",
                    x,
                    val,
                    tag or "DERIVED: run-accept-reverse extraction + Jacobi, checked by sampling",
                    f"qoptlab qopt solve {name}.json --input '{x}'",
                )
            )
    elif kind == "source":
        from ..constructions import QubitSource

        src = QubitSource.from_dict(doc)
        for x in extra["inputs"]:
            for y, w in enumerate(src.weights(x)):
                refs.append(Reference(f"weight[{y}]", x, float(w), tag or "DERIVED: simulation", f"qoptlab construct source {name}.json --x {x}"))
    return refs


def write_corpus(root=None):
    """Write every document and the manifest; returns the manifest."""
    root = Path(root) if root else package_corpus()
    root.mkdir(parents=True, exist_ok=True)
    manifest = {"fixtures": []}
    for name, (kind, doc, extra) in sorted(build_documents().items()):
        path = root / f"{name}.json"
        if kind == "machine":
            path.write_text(emit_machine(machine_from_dict(doc)) + "\n")
        else:
            path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        refs = compute_references(name, kind, doc, extra)
        manifest["fixtures"].append(
            {
                "name": name,
                "file": path.name,
                "kind": kind,
                "extra": extra,
                "references": [r.to_dict() for r in refs],
            }
        )
    (root / "oracle-set.json").write_text(json.dumps({"members": ["1"]}, indent=2) + "\n")
    (root / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def load_manifest(root=None):
    root = Path(root) if root else corpus_root()
    return json.loads((root / MANIFEST).read_text())


def load_document(name, root=None):
    root = Path(root) if root else corpus_root()
    return json.loads((root / f"{name}.json").read_text())


def _compare(root, entry, tol):
    doc = json.loads((Path(root) / entry["file"]).read_text())
    fresh = compute_references(entry["name"], entry["kind"], doc, entry["extra"])
    stored = {(r["quantity"], r["input"]): r for r in entry["references"]}
    rows = []
    for ref in fresh:
        old = stored.pop((ref.quantity, ref.input), None)
        if old is None:
            rows.append({"fixture": entry["name"], "quantity": ref.quantity, "input": ref.input, "status": "missing"})
            continue
        drift = abs(round_sig(ref.value) - old["value"])
        rows.append(
            {
                "fixture": entry["name"],
                "quantity": ref.quantity,
                "input": ref.input,
                "stored": old["value"],
                "fresh": round_sig(ref.value),
                "drift": drift,
                "status": "ok" if drift <= tol else "diff",
            }
        )
    for key in stored:
        rows.append({"fixture": entry["name"], "quantity": key[0], "input": key[1], "status": "stale"})
    return rows


def regenerate(root=None, tol=REGEN_TOL, jobs=1):
    """Recompute every stored reference and report differences.

    ``jobs > 1`` spreads fixtures over worker processes; row order is the
    manifest order either way.
    """
    root = Path(root) if root else corpus_root()
    entries = load_manifest(root)["fixtures"]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_compare, [root] * len(entries), entries, [tol] * len(entries)))
    else:
        chunks = [_compare(root, e, tol) for e in entries]
    rows = [r for chunk in chunks for r in chunk]
    return {"rows": rows, "passed": all(r["status"] == "ok" for r in rows)}


def calibration_cases():
    """``(machine, x, t, index_size)`` for every corpus run."""
    from ..qopt import problem_from_dict

    cases = []
    for name, (kind, doc, extra) in sorted(build_documents().items()):
        if kind == "problem":
            prob = problem_from_dict(doc)
            cases += [(prob.machine, x, prob.steps, prob.index_size) for x in extra["inputs"]]
        elif kind == "machine" and extra["inputs"] and "oracle" not in extra:
            m = machine_from_dict(doc)
            cases += [(m, x, extra["steps"], 0) for x in extra["inputs"]]
    return cases


def write_calibration(root=None):
    from ..approx import calibrate

    root = Path(root) if root else package_corpus()
    table = calibrate(calibration_cases())
    table["command"] = "qoptlab fixtures regen --calibration"
    (root / "calibration.json").write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    return table
