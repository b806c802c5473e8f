"""Command-line entry point: every experiment as a subcommand emitting CSV.

Output goes to ``--out``, else to ``$QCOMM_OUT_DIR/<subcommand>.csv`` when
that variable is set, else to stdout.  A fixed ``--seed`` gives
byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import noise as noise_mod
from . import qkdmodel, rio
from .circuits import preparation_circuit, prepare_named, run_circuit
from .noise import NoiseModel, noise_sweep, sweep_csv
from .qav import (VoteVector, all_patterns, max_iterations, protocol_a_final, protocol_a_run,
                  protocol_b_final, protocol_b_run)
from .qstate import (MixedState, StateError, fidelity, pauli_expectations, pauli_strings,
                     random_mixed, sample_counts, tensor_product, tomography_reconstruct)
from .teleport import (BroadcastChannelSpec, GhzLikePayload, KnownQubit, broadcast_known,
                       mqt_receiver_histogram, mqt_run)

OUT_ENV = "QCOMM_OUT_DIR"
DEFAULT_SHOTS = 8192


def _f(x: float) -> str:
    return f"{x:.12f}"


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _with_counts(header, rows, prob_col: int, args) -> str:
    """Append sampled counts drawn from the probability column in sampled mode."""
    if args.mode != "sampled":
        return _table(header, rows)
    probs = {str(i): float(r[prob_col]) for i, r in enumerate(rows)}
    counts = sample_counts(probs, args.shots, np.random.default_rng(args.seed))
    return _table(list(header) + ["counts"], [list(r) + [counts.get(str(i), 0)] for i, r in enumerate(rows)])


# -- sweep runners shared with the test suite ---------------------------------------------

def sweep_runner(protocol: str, seed: int = 0):
    """Runner for noise_sweep: NoiseModel | None -> state or list of states.

    mqt        m=1 payload pair, noise on both receiver halves, averaged receiver states
    broadcast  plain RSP to two receivers, averaged receiver states
    qav-a      every 4-voter pattern and iteration, noise on each hop
    qav-b-cluster4 / qav-b-ghz3   every 4-voter pattern, noise on each hop
    """
    rng = np.random.default_rng(seed)
    if protocol == "mqt":
        pa, pb = GhzLikePayload.random(1, rng), GhzLikePayload.random(2, rng)
        return lambda nm: mqt_run(pa, pb, nm).averaged_states()
    if protocol == "broadcast":
        q = KnownQubit(float(rng.uniform(0, np.pi)), float(rng.uniform(0, 2 * np.pi)))
        spec = BroadcastChannelSpec("plain", 2)

        def run(nm):
            res = broadcast_known(q, spec, nm)
            out = []
            for j in range(spec.receivers):
                out.append(MixedState(sum(b.probability * b.states[j].density().matrix
                                          for b in res.branches)))
            return out
        return run
    if protocol == "qav-a":
        pats = list(all_patterns(4))
        return lambda nm: [protocol_a_final(v, t, nm) for v in pats for t in range(max_iterations(4))]
    if protocol.startswith("qav-b-"):
        res = protocol[len("qav-b-"):]
        pats = list(all_patterns(4))
        return lambda nm: [protocol_b_final(v, res, noise=nm) for v in pats]
    raise StateError(f"unknown sweep protocol {protocol!r}")


SWEEP_PROTOCOLS = ("mqt", "broadcast", "qav-a", "qav-b-cluster4", "qav-b-ghz3")


def state_preparation_fidelity(name: str, nm: NoiseModel | None) -> float:
    """Fidelity of a resource prepared with gate noise against the ideal one.

    ``name`` is a preparation name or "bell x bell" for two independent pairs.
    """
    if name == "bell x bell":
        pair = noise_mod.run_noisy_circuit(preparation_circuit("phi+"), nm)
        ideal = prepare_named("phi+")
        return fidelity(tensor_product(ideal, ideal), tensor_product(pair, pair))
    return fidelity(prepare_named(name), noise_mod.run_noisy_circuit(preparation_circuit(name), nm))


# -- subcommands -----------------------------------------------------------------------

def cmd_mqt(args) -> str:
    rng = np.random.default_rng(args.seed)
    if args.payload == "plus":
        s = 1 / math.sqrt(2)
        pa, pb = GhzLikePayload(args.m, s, s), GhzLikePayload(args.m + 1, s, s)
    else:
        pa, pb = GhzLikePayload.random(args.m, rng), GhzLikePayload.random(args.m + 1, rng)
    if args.mode == "sampled":
        hist, probs = mqt_receiver_histogram(pa, pb, args.shots, args.seed)
        rows = [[k, _f(probs[k]), hist.counts.get(k, 0)] for k in sorted(probs)]
        return _table(["receivers", "probability", "counts"], rows)
    res = mqt_run(pa, pb)
    rows = [[b.bits, _f(b.probability), _f(b.fidelities[0]), _f(b.fidelities[1])] for b in res.branches]
    return _table(["bits", "probability", "fidelity_a", "fidelity_b"], rows)


def cmd_broadcast(args) -> str:
    rng = np.random.default_rng(args.seed)

    def known():
        th = args.theta if args.theta is not None else float(rng.uniform(0, np.pi))
        ph = args.phi if args.phi is not None else float(rng.uniform(0, 2 * np.pi))
        return KnownQubit(th, ph)

    if args.variant == "multidirectional":
        payload = [known() for _ in range(args.receivers)]
    else:
        payload = known()
    spec = BroadcastChannelSpec(args.variant, args.receivers, disclose=not args.withhold)
    res = broadcast_known(payload, spec, rng=rng if args.variant == "controlled" else None)
    rows = [[res.status, b.bits, _f(b.probability), _f(b.fidelity)] for b in res.branches]
    if not rows:
        rows = [[res.status, "", "", ""]]
        return _table(["status", "bits", "probability", "fidelity"], rows)
    return _with_counts(["status", "bits", "probability", "fidelity"], rows, 2, args)


def _payload(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return v / np.linalg.norm(v)


def _rio_rows(res: rio.RioResult):
    names = list(res.branches[0].bits)
    rows = [[b.bits[n] for n in names] + [_f(b.probability), _f(b.fidelity)] for b in res.branches]
    return names + ["probability", "fidelity"], rows


def _surface(args) -> str:
    zs = np.linspace(args.z_min, args.z_max, args.grid)
    ds = np.linspace(1.0 / args.grid, 1.0, args.grid)
    return rio.success_surface_csv(zs, ds, [args.theta])


def cmd_rio_riho(args) -> str:
    if args.surface:
        return _surface(args)
    rng = np.random.default_rng(args.seed)
    op = rio.SuOperator.random(rng, "lump")
    header, rows = _rio_rows(rio.run_riho(_payload(rng), op, args.channel))
    return _with_counts(header, rows, len(header) - 2, args)


def cmd_rio_ripuo(args) -> str:
    if args.surface:
        return _surface(args)
    rng = np.random.default_rng(args.seed)
    u0, u1 = rio.SuOperator.random(rng, "lump").sub_operators
    op = u0 if args.op == "diagonal" else u1
    header, rows = _rio_rows(rio.run_ripuo(_payload(rng), op, args.channel))
    return _with_counts(header, rows, len(header) - 2, args)


def cmd_rio_cjrio(args) -> str:
    rng = np.random.default_rng(args.seed)
    psi = _payload(rng)
    ops = [rio.SuOperator.random(rng) for _ in range(args.joint)]
    res = rio.run_cjrio(psi, ops, args.controllers, consent=not args.no_consent,
                        trajectories=args.trajectories, seed=args.seed)
    if res.branches and res.branches[0].fidelity is None:
        names = list(res.branches[0].bits)
        rows = [[res.status] + [b.bits[n] for n in names] + [_f(b.probability)] for b in res.branches]
        return _table(["status"] + names + ["probability"], rows)
    header, rows = _rio_rows(res)
    rows = [[res.status] + r for r in rows]
    return _with_counts(["status"] + header, rows, len(header) - 1, args)


QAV_HEADER = ["resource", "vetoes", "iteration", "label", "conclusive", "outcome", "probability"]


def _qav_table(rows, dists, args) -> str:
    """rows plus, in sampled mode, shot counts of each row's outcome string."""
    if args.mode != "sampled":
        return _table(QAV_HEADER, rows)
    rng = np.random.default_rng(args.seed)
    out = [r + [sample_counts(d, args.shots, rng).get(r[5], 0)] for r, d in zip(rows, dists)]
    return _table(QAV_HEADER + ["counts"], out)


def cmd_qav_a(args) -> str:
    votes = VoteVector.from_string(args.vetoes)
    res = protocol_a_run(votes)
    rows = [["bell", str(votes), r.t + 1, r.label, int(r.conclusive), r.outcome,
             _f(r.probabilities[r.outcome])] for r in res.rounds]
    return _qav_table(rows, [r.probabilities for r in res.rounds], args)


def cmd_qav_b(args) -> str:
    pats = list(all_patterns(4)) if args.vetoes == "all" else [VoteVector.from_string(args.vetoes)]
    prep = preparation_circuit(args.resource)
    readout = prep.inverse().measure(range(prep.num_qubits))
    rows, dists = [], []
    for v in pats:
        r = protocol_b_run(v, args.resource)
        rows.append([args.resource, str(v), 1, r.verdict, int(r.conclusive), r.outcome, _f(r.probability)])
        dists.append(run_circuit(readout, r.final_state).probabilities())
    return _qav_table(rows, dists, args)


_QKD_AXES = {"dr": "DR", "cr": "CR", "td": "t_d", "d": "d"}


def _qkd_config(args) -> None:
    """Fill args from a JSON config: protocol, params, sweep, grid, dead_time."""
    cfg = json.loads(Path(args.config).read_text())
    unknown = set(cfg) - {"protocol", "params", "sweep", "grid", "dead_time", "compare"}
    if unknown:
        raise StateError(f"unknown config keys {sorted(unknown)}")
    args.protocol = str(cfg.get("protocol", args.protocol)).lower()
    args.sweep = cfg.get("sweep", args.sweep)
    args.grid = cfg.get("grid", args.grid)
    args.dead_time = bool(cfg.get("dead_time", args.dead_time))
    args.compare = bool(cfg.get("compare", args.compare))
    for k, v in cfg.get("params", {}).items():
        if k not in ("d", "dr", "cr", "td", "eta"):
            raise StateError(f"unknown qkd parameter {k!r}")
        setattr(args, k, float(v))
    if args.protocol not in ("cow", "dps") or (args.sweep is not None and args.sweep not in _QKD_AXES):
        raise StateError("config protocol must be cow|dps and sweep one of dr, cr, td, d")


def cmd_qkd(args) -> str:
    if args.config:
        _qkd_config(args)
    proto = args.protocol.upper()
    over = {"d": args.d, "DR": args.dr, "CR": args.cr, "t_d": args.td * 1e-6}
    if args.eta is not None:
        over["eta"] = args.eta
    base = qkdmodel.QkdParams.defaults(proto, **over)
    protos = [proto] if not args.compare else list(qkdmodel.PROTOCOLS)
    results = []
    for p in protos:
        b = base if p == proto else qkdmodel.QkdParams.defaults(p, **over)
        if args.sweep is None:
            results.append(qkdmodel.key_rate(b, args.dead_time))
            continue
        axis = _QKD_AXES[args.sweep]
        grid = args.grid if args.grid else qkdmodel.default_grid(axis)
        if axis == "t_d" and args.grid:
            grid = [g * 1e-6 for g in grid]
        results += qkdmodel.sweep(b, axis, grid, args.dead_time)
    return qkdmodel.results_csv(results)


def cmd_noise_sweep(args) -> str:
    grid = noise_mod.default_grid(args.step)
    chans = noise_mod.CHANNELS if args.channel == "all" else (args.channel,)
    if args.protocol in ("bell x bell", "cluster4", "bell", "ghz3"):
        rows = []
        name = "phi+" if args.protocol == "bell" else args.protocol
        for ch in chans:
            for p in grid:
                nm = NoiseModel(ch, p, args.convention)
                rows.append([ch, f"{p:.6g}", args.protocol, _f(state_preparation_fidelity(name, nm))])
        return _table(["channel", "p", "protocol", "fidelity"], rows)
    runner = sweep_runner(args.protocol, args.seed)
    pts = []
    for ch in chans:
        pts += noise_sweep(runner, ch, grid, protocol=args.protocol, convention=args.convention)
    return sweep_csv(pts)


def _sampled_expectations(rho, shots: int, rng) -> dict:
    exact = pauli_expectations(rho)
    out = {}
    for s in pauli_strings(rho.num_qubits):
        if set(s) == {"I"}:
            out[s] = 1.0
            continue
        p_plus = min(max((1 + exact[s]) / 2, 0.0), 1.0)
        k = rng.binomial(shots, p_plus)
        out[s] = 2 * k / shots - 1
    return out


def cmd_tomography(args) -> str:
    rng = np.random.default_rng(args.seed)
    rows = []
    for i in range(args.states):
        rho = random_mixed(args.qubits, rng)
        if args.mode == "sampled":
            ev = _sampled_expectations(rho, args.shots, rng)
        else:
            ev = pauli_expectations(rho)
        rec = tomography_reconstruct(ev)
        err = float(np.max(np.abs(rec.matrix - rho.matrix)))
        rows.append([i, args.qubits, f"{err:.3e}", _f(fidelity(rho, rec))])
    return _table(["index", "qubits", "max_error", "fidelity"], rows)


COMMANDS = {
    "mqt": cmd_mqt,
    "broadcast": cmd_broadcast,
    "rio-riho": cmd_rio_riho,
    "rio-ripuo": cmd_rio_ripuo,
    "rio-cjrio": cmd_rio_cjrio,
    "qav-a": cmd_qav_a,
    "qav-b": cmd_qav_b,
    "qkd": cmd_qkd,
    "noise-sweep": cmd_noise_sweep,
    "tomography": cmd_tomography,
}


def _positive(v: str) -> int:
    n = int(v)
    if n <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def _seed(v: str) -> int:
    n = int(v)
    if not 0 <= n < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--shots", type=_positive, default=DEFAULT_SHOTS)
    common.add_argument("--mode", choices=("analytic", "sampled"), default="analytic")
    common.add_argument("--out", type=Path, default=None, help="CSV path (default: stdout)")

    p = argparse.ArgumentParser(prog="qcomm", description="Quantum communication protocol simulator")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("mqt", parents=[common], help="two-receiver teleportation of GHZ-like payloads")
    s.add_argument("--m", type=_positive, default=1)
    s.add_argument("--payload", choices=("random", "plus"), default="random")

    s = sub.add_parser("broadcast", parents=[common], help="broadcast a known qubit")
    s.add_argument("--variant", choices=("plain", "joint", "controlled", "multidirectional"), default="plain")
    s.add_argument("--receivers", type=_positive, default=2)
    s.add_argument("--theta", type=float, default=None)
    s.add_argument("--phi", type=float, default=None)
    s.add_argument("--withhold", action="store_true", help="controller keeps the disclosure")

    for name, extra in (("rio-riho", None), ("rio-ripuo", "op")):
        s = sub.add_parser(name, parents=[common], help="remote operator on a photonic qubit")
        s.add_argument("--channel", choices=rio.CHANNELS, default="omega+")
        if extra:
            s.add_argument("--op", choices=("diagonal", "antidiagonal"), default="diagonal")
        s.add_argument("--surface", action="store_true", help="emit the success-probability surface")
        s.add_argument("--theta", type=float, default=math.pi)
        s.add_argument("--z-min", type=float, default=0.5)
        s.add_argument("--z-max", type=float, default=3.0)
        s.add_argument("--grid", type=_positive, default=20)

    s = sub.add_parser("rio-cjrio", parents=[common], help="controlled joint remote operators")
    s.add_argument("--joint", type=_positive, default=2)
    s.add_argument("--controllers", type=int, default=1)
    s.add_argument("--no-consent", action="store_true")
    s.add_argument("--trajectories", type=_positive, default=None)

    s = sub.add_parser("qav-a", parents=[common], help="iterative veto protocol")
    s.add_argument("--vetoes", required=True, help="one 0/1 per voter, 1 = veto")

    s = sub.add_parser("qav-b", parents=[common], help="single-round veto protocol")
    s.add_argument("--resource", choices=("cluster4", "ghz3"), default="cluster4")
    s.add_argument("--vetoes", required=True, help="four 0/1 flags, or 'all'")

    s = sub.add_parser("qkd", parents=[common], help="COW / DPS key-rate model")
    s.add_argument("--protocol", type=str.lower, choices=("cow", "dps"), default="dps")
    s.add_argument("--sweep", type=str.lower, choices=tuple(_QKD_AXES), default=None)
    s.add_argument("--grid", type=float, nargs="+", default=None, help="t_d grid in microseconds")
    s.add_argument("--d", type=float, default=80.0)
    s.add_argument("--dr", type=float, default=0.03125)
    s.add_argument("--cr", type=float, default=0.5)
    s.add_argument("--td", type=float, default=50.0, help="dead time in microseconds")
    s.add_argument("--eta", type=float, default=None)
    s.add_argument("--dead-time", action="store_true", help="apply 1/(1 + C t_d)")
    s.add_argument("--compare", action="store_true", help="emit both protocols")
    s.add_argument("--config", type=Path, default=None, help="JSON config; its values override flags")

    s = sub.add_parser("noise-sweep", parents=[common], help="fidelity against noise strength")
    s.add_argument("--protocol", choices=SWEEP_PROTOCOLS + ("bell", "bell x bell", "cluster4", "ghz3"),
                   default="mqt")
    s.add_argument("--channel", choices=noise_mod.CHANNELS + ("all",), default="all")
    s.add_argument("--step", type=float, default=0.05)
    s.add_argument("--convention", choices=noise_mod.CONVENTIONS, default="printed")

    s = sub.add_parser("tomography", parents=[common], help="Pauli tomography round trip")
    s.add_argument("--qubits", type=int, choices=(1, 2), default=1)
    s.add_argument("--states", type=_positive, default=50)
    return p


def _destination(args) -> Path | None:
    if args.out is not None:
        return args.out
    d = os.environ.get(OUT_ENV)
    return Path(d) / f"{args.command}.csv" if d else None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = COMMANDS[args.command](args)
    except (StateError, ValueError, OSError) as exc:
        print(f"qcomm {args.command}: error: {exc}", file=sys.stderr)
        return 2
    dest = _destination(args)
    if dest is None:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:
            # reader closed early, e.g. piped into head
            os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
    else:
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_text(text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
