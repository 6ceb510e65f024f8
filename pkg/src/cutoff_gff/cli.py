"""Reflection positivity and Markov probes for spectrally cut-off Gaussian free fields.

Each subcommand reads one JSON config (all sections optional unless noted),
runs a pipeline and writes a JSON or CSV report.  Exit status: 0 on success,
2 when a witness construction or estimate fails, 1 on configuration errors.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import io, markov, phi4, rp, witness
from .errors import ConfigurationError, ConstructionFailed, CutoffGFFError, DegenerateWeightsError
from .spectral import (
    build_basis,
    exact_gff_kernel,
    gff_kernel,
    plateau_field,
    region_partition,
    sample_gff,
)

COMMANDS = ("spectrum", "sample", "witness", "rp-check", "markov", "phi4-sweep")
WITNESS_KINDS = ("halfline", "cylinder", "compact", "halfspace")

_WITNESS_DEFAULTS = {
    "cylinder": ({"kind": "cylinder", "points": 128}, 4.0),
    "compact": ({"kind": "circle", "points": 64}, 5.0),
    "halfspace": ({"kind": "periodic_grid", "dim": 1, "extent": 32.0, "points": 256}, 3.0),
}


class Report:
    """A JSON payload plus an optional CSV rendering."""

    def __init__(self, payload, csv_header=None, csv_rows=None):
        self.payload = payload
        self.csv_header = csv_header
        self.csv_rows = csv_rows

    def render(self, fmt):
        if fmt == "json":
            return io.dumps_json(self.payload)
        if self.csv_rows is None:
            raise ConfigurationError("this command has no CSV form", "--format")
        return io.csv_text(self.csv_rows, self.csv_header)


def _with_defaults(doc, geometry, lam):
    doc = dict(doc)
    doc.setdefault("geometry", geometry)
    doc.setdefault("cutoff", {"lambda": lam})
    return doc


def _seed(doc):
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigurationError(f"seed must be a nonnegative integer, got {seed!r}", "seed")
    return seed


def cmd_spectrum(doc, args):
    doc = {"geometry": {"kind": "circle", "points": 64}, **doc}
    g = io.geometry_from_config(doc)
    basis = build_basis(g)
    cutoff = io.cutoff_from_config(doc, required=False)
    kernel = gff_kernel(basis, cutoff)
    header, rows = io.spectrum_rows(basis, kernel.multiplier)
    payload = {
        "geometry": g.to_dict(),
        "cutoff": None if cutoff is None else cutoff.to_dict(),
        "eigenvalues": basis.eigenvalues,
        "parity": basis.parity,
        "multiplier": kernel.multiplier,
    }
    return Report(payload, header, rows)


def cmd_sample(doc, args):
    doc = {"geometry": {"kind": "circle", "points": 64}, **doc}
    g = io.geometry_from_config(doc)
    basis = build_basis(g)
    cutoff = io.cutoff_from_config(doc, required=False)
    field = sample_gff(gff_kernel(basis, cutoff), _seed(doc))
    payload = io.field_to_dict(field)
    payload["seed"] = _seed(doc)
    payload["cutoff"] = None if cutoff is None else cutoff.to_dict()
    header, rows = io.field_csv_rows(field)
    return Report(payload, header, rows)


def _rho(basis, section, core, support):
    return plateau_field(basis, float(section.get("rho_core", core)), float(section.get("rho_support", support)))


def cmd_witness(doc, args):
    kind = args.kind or doc.get("witness", {}).get("kind", "halfline")
    if kind not in WITNESS_KINDS:
        raise ConfigurationError(f"unknown witness kind {kind!r}", "witness.kind")
    sec = doc.get("witness", {})
    if kind == "halfline":
        spec = witness.BumpSpec(
            float(sec.get("center", np.pi / 2)),
            float(sec.get("width", 0.3)),
            int(sec.get("derivative_order_cap", 64)),
        )
        h, cert = witness.build_halfline_witness(spec, points_per_width=int(sec.get("points_per_width", 512)))
        return Report({"certificate": cert.to_dict()}, ["x", "value"], [[float(x), float(v)] for x, v in zip(h.x, h.values)])

    doc = _with_defaults(doc, *_WITNESS_DEFAULTS[kind])
    g = io.geometry_from_config(doc)
    cutoff = io.cutoff_from_config(doc)
    basis = build_basis(g)
    if kind == "cylinder":
        if g.kind != "cylinder":
            raise ConfigurationError("cylinder witness needs a cylinder geometry", "geometry.kind")
        h, _ = witness.build_halfline_witness(witness.BumpSpec(float(sec.get("center", np.pi / 2)), float(sec.get("width", 0.3))))
        f, cert = witness.build_cylinder_witness(cutoff.lam, g, h)
    elif kind == "compact":
        f, cert = witness.build_compact_witness(basis, cutoff.lam, region_partition(g))
    else:
        part = region_partition(g)
        radius = float(sec.get("support_radius", 2.0))
        r = np.sqrt(sum(c**2 for c in g.coordinates()))
        rho = _rho(basis, sec, 2.0, 3.0)
        max_res = sec.get("max_residual")
        f, residual = witness.fit_fourier_restriction(
            basis, part.plus_mask & (r < radius), cutoff.lam, rho,
            max_residual=None if max_res is None else float(max_res),
        )
        cert = witness.halfspace_certificate(f, gff_kernel(basis, cutoff), rho, residual)
    payload = {"certificate": cert.to_dict(), "geometry": g.to_dict(), "cutoff": cutoff.to_dict()}
    header, rows = io.field_csv_rows(f)
    return Report(payload, header, rows)


def cmd_rp_check(doc, args):
    doc = _with_defaults(doc, {"kind": "circle", "points": 64}, 5.0)
    sec = doc.get("rp_check", {})
    g = io.geometry_from_config(doc)
    basis = build_basis(g)
    cutoff = io.cutoff_from_config(doc)
    which = sec.get("kernel", "cutoff")
    if which == "cutoff":
        kernel = gff_kernel(basis, cutoff)
    elif which == "uncut":
        kernel = gff_kernel(basis)
    elif which == "exact":
        kernel = exact_gff_kernel(basis)
    else:
        raise ConfigurationError(f"unknown kernel {which!r}", "rp_check.kernel")
    extra = []
    if sec.get("include_witness", True):
        try:
            f, _ = witness.build_compact_witness(basis, cutoff.lam, region_partition(g))
            extra.append(f)
        except ConstructionFailed:
            if "include_witness" in sec:
                raise
    widths = sec.get("widths", [2.0, 4.0])
    if not isinstance(widths, list) or not widths:
        raise ConfigurationError("widths must be a nonempty list", "rp_check.widths")
    tests = rp.default_test_family(basis, [float(w) for w in widths], extra)
    q = rp.assemble_rp_gram(kernel, tests)
    tol = sec.get("tolerance")
    report = rp.certify_rp(q, None if tol is None else float(tol))
    payload = report.to_dict()
    payload.update({"geometry": g.to_dict(), "cutoff": cutoff.to_dict(), "kernel": which, "gram_symmetry_defect": q.symmetry_defect})
    return Report(payload, None, np.asarray(q).tolist())


def cmd_markov(doc, args):
    sec = doc.get("markov", {})
    tol = float(sec.get("tolerance", 1e-10))
    graph = sec.get("graph")
    if graph is not None:
        n = int(sec.get("nodes", 16))
        if graph == "path":
            adj = markov.path_adjacency(n)
        elif graph == "cycle":
            adj = markov.cycle_adjacency(n)
        else:
            raise ConfigurationError(f"unknown graph {graph!r}", "markov.graph")
        model = markov.build_discrete_gff(adj, float(sec.get("mass", 1.0)))
        region = sec.get("region", list(range(n // 2)))
        if not isinstance(region, list) or not all(isinstance(s, int) and 0 <= s < n for s in region):
            raise ConfigurationError("region must be a list of vertex indices", "markov.region")
        boundary = markov.node_boundary(adj, region)
        targets = [s for s in range(n) if s not in region]
        extra = {"graph": graph, "nodes": n}
    else:
        doc = _with_defaults(doc, {"kind": "circle", "points": 64}, 5.0)
        g = io.geometry_from_config(doc)
        cutoff = io.cutoff_from_config(doc)
        model = markov.kernel_gaussian_model(gff_kernel(build_basis(g), cutoff))
        part = region_partition(g)
        sites = list(model.sites)
        closed = (part.plus_mask | part.interface_mask).ravel()
        region = [s for s, m in zip(sites, closed) if m]
        boundary = markov.node_boundary(markov.grid_adjacency(g), region, sites)
        targets = [s for s, m in zip(sites, part.minus_mask.ravel()) if m]
        extra = {"geometry": g.to_dict(), "cutoff": cutoff.to_dict()}
    report = markov.markov_discrepancy(model, region, boundary, targets, tol)
    payload = report.to_dict()
    payload.update(extra)
    payload["boundary"] = [b if isinstance(b, int) else list(b) for b in boundary]
    rows = [[str(t), float(d)] for t, d in zip(report.targets, report.per_target_delta_sq)]
    return Report(payload, ["target", "delta_sq"], rows)


def cmd_phi4_sweep(doc, args):
    doc = _with_defaults(doc, {"kind": "circle", "points": 64}, 3.0)
    sec = doc.get("phi4", {})
    g = io.geometry_from_config(doc)
    basis = build_basis(g)
    cutoff = io.cutoff_from_config(doc)
    rho = _rho(basis, sec, 2.5, 3.0)
    kernel = gff_kernel(basis, cutoff)
    ct = sec.get("counterterm", "default")
    if ct == "default":
        counterterm, source = phi4.default_counterterm(kernel, rho), "default: -3 x mean field variance on supp rho"
    else:
        try:
            counterterm, source = float(ct), "explicit"
        except (TypeError, ValueError):
            raise ConfigurationError(f"expected a number or 'default', got {ct!r}", "phi4.counterterm") from None
    couplings = sec.get("couplings", [0.0, 1e-3, 1e-2, 1e-1])
    if not isinstance(couplings, list) or not couplings:
        raise ConfigurationError("couplings must be a nonempty list", "phi4.couplings")
    config = phi4.Phi4Config(
        float(couplings[0]), counterterm, rho, cutoff, int(sec.get("num_samples", 20000)), _seed(doc),
        counterterm_source=source,
    )
    part = region_partition(g)
    f, cert = witness.build_compact_witness(basis, cutoff.lam, part, support_mask=part.plus_mask & config.core_mask)
    estimates = phi4.coupling_sweep(f, config, [float(c) for c in couplings], kernel)
    payload = {
        "config": config.to_dict(),
        "geometry": g.to_dict(),
        "gaussian_value": witness.halfspace_pairing(f, kernel, rho),
        "test_function": cert.to_dict(),
        "estimates": [e.to_dict() for e in estimates],
    }
    rows = [[e.coupling, e.value, e.std_error] for e in estimates]
    return Report(payload, ["coupling", "value", "std_error"], rows)


HANDLERS = {
    "spectrum": cmd_spectrum,
    "sample": cmd_sample,
    "witness": cmd_witness,
    "rp-check": cmd_rp_check,
    "markov": cmd_markov,
    "phi4-sweep": cmd_phi4_sweep,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--output", help="report path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--seed", type=int, help="override the config seed")
    parser = argparse.ArgumentParser(prog="cutoff-gff", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "witness":
            p.add_argument("--kind", choices=WITNESS_KINDS)
    return parser


def run(argv=None, stdout=None):
    stdout = sys.stdout if stdout is None else stdout
    args = build_parser().parse_args(argv)
    try:
        doc = io.load_config(args.config) if args.config else {}
        if "command" in doc and doc["command"] != args.command:
            raise ConfigurationError(f"config is for {doc['command']!r}, not {args.command!r}", "command")
        if args.seed is not None:
            doc["seed"] = args.seed
        text = HANDLERS[args.command](doc, args).render(args.format)
    except (ConstructionFailed, DegenerateWeightsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        value = getattr(exc, "value", None)
        if value is not None:
            print(f"best value reached: {value!r}", file=sys.stderr)
        return 2
    except (CutoffGFFError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    if args.output:
        io.write_text_atomic(args.output, text)
    else:
        stdout.write(text)
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
