"""Command-line entry point: generate networks, analyze them, run single
protocol simulations, and drive the Monte-Carlo experiments.

Exit codes: 0 success, 2 bad usage or malformed input, 3 unreadable or
unwritable path, 4 simulation hit its slot cap, 5 experiment threshold
failed (the CSV is still written).  Every stochastic command requires an
explicit --seed; nothing is derived from the clock.
"""

from __future__ import annotations

import argparse
import math
import sys

from . import experiments, geomnet, limits, protocols, radiosim
from .radiosim import ChannelModel, RngStream

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NONTERMINATION = 4
EXIT_THRESHOLD = 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load_net(path: str) -> geomnet.Network:
    try:
        return geomnet.load_network(path)
    except OSError as exc:
        raise CliError(f"cannot read network file: {exc}", EXIT_IO)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE)


def cmd_generate(args) -> int:
    if (args.ell is None) == (args.radius is None):
        raise CliError("give exactly one of --ell / --radius", EXIT_USAGE)
    area = args.side * args.side
    if args.ell is not None:
        radius = limits.r_superconnectivity(
            limits.RangeParams(n=args.n, area=area, ell=args.ell)
        )
    else:
        radius = args.radius
    net = geomnet.generate_network(args.n, args.side, radius, args.seed)
    try:
        geomnet.save_network(net, args.out)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO)
    density_ratio = (
        math.pi * (args.n / area) * radius * radius / math.log(args.n) if args.n >= 2 else float("nan")
    )
    print(f"wrote {args.out}: n={args.n} side={args.side:.12g} radius={radius:.12g}")
    print(f"pi * (n/|X|) * r^2 / ln(n) = {density_ratio:.12g}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    net = _load_net(args.net)
    stats = geomnet.graph_stats(net)
    print(f"n={net.n} side={net.side:.12g} radius={net.radius:.12g}")
    print(f"connected={stats.connected}")
    print(f"min_degree={stats.min_degree} max_degree={stats.max_degree}")
    print(f"isolated_count={stats.isolated_count}")
    print(f"diameter_hops={stats.diameter_hops}")
    print(f"coverage_min={stats.coverage_min}")
    if net.n < 2:
        return EXIT_OK
    ln_n = math.log(net.n)
    implied_ell = math.pi * (net.n / net.area) * net.radius**2 / ln_n - 1.0
    print(f"implied_ell={implied_ell:.12g}")
    if implied_ell <= 0:
        print("bounds: n/a (radius at or below the connectivity threshold)")
        return EXIT_OK
    db = limits.degree_bounds(implied_ell)
    dia = limits.diameter_bound(net.n, implied_ell)
    low = db.low_coeff * ln_n
    high = db.high_coeff * ln_n
    print(f"degree_low_bound={low:.12g} pass={stats.min_degree >= low}")
    print(f"degree_high_bound={high:.12g} pass={stats.max_degree <= high}")
    print(f"diameter_bound={dia:.12g} pass={stats.diameter_hops <= dia}")
    return EXIT_OK


def _print_trace(trace, n: int) -> None:
    for line in trace.dump_lines(n):
        print(line)


def cmd_simulate(args) -> int:
    if args.protocol == "send":
        if args.d is None or args.T is None:
            raise CliError("simulate send needs --d and --T", EXIT_USAGE)
        net = protocols.build_star(args.d)
        cfg = protocols.SendConfig(payload="m", T=args.T, base=args.base)
        programs = [protocols.listen_program(args.T)] + [protocols.send_program(cfg, net.radius)] * args.d
        trace = radiosim.run(
            ChannelModel.multihop(net), programs, args.T + 3, RngStream(args.seed, net.n),
            record_trace=args.trace,
        )
        heard = trace.final_states[0]["heard"]
        print(f"slots={trace.slot_count} success={len(heard) > 0} receptions={len(heard)}")
        if args.trace:
            _print_trace(trace, net.n)
        return EXIT_OK

    if args.protocol == "broadcast":
        net = _load_net(args.net)
        p0 = max(math.floor(math.log2(net.n)), 2)
        bounds = limits.upper_bounds_from_p0(p0)
        cfg = protocols.BroadcastConfig(
            epsilon=args.epsilon, delta_bound=bounds.delta_max, n_bound=bounds.n_max
        )
        trace = protocols.run_broadcast(net, cfg, net.radius, args.seed)
        informed = sum(
            1
            for st in trace.final_states.values()
            if st is not None and (not st.relayed or st.informed_at is not None)
        )
        print(f"slots={trace.slot_count} informed={informed}/{net.n} k={cfg.k} tau={cfg.tau}")
        if args.trace:
            _print_trace(trace, net.n)
        return EXIT_OK if informed == net.n else EXIT_NONTERMINATION

    if args.protocol == "sfr":
        net = _load_net(args.net)
        eps = args.epsilon if args.epsilon is not None else experiments.sfr_epsilon_for(net.n)
        res = protocols.run_sfr(net, eps, args.seed, r_max=args.rmax, record_trace=args.trace)
        if res.truncated or res.p_hat is None:
            print("non-termination: slot cap hit before every node exited")
            return EXIT_NONTERMINATION
        bounds = limits.upper_bounds_from_p0(max(res.p_hat, 2))
        print(f"slots={res.slots} consensus={res.consensus} p_hat={res.p_hat}")
        print(f"bounds: n_max={bounds.n_max} delta_max={bounds.delta_max} diam_max={bounds.diam_max}")
        return EXIT_OK

    if args.protocol == "init-single":
        if args.n is None:
            raise CliError("simulate init-single needs --n", EXIT_USAGE)
        channel = ChannelModel.single_hop(args.n, collision_detection=True)
        res = protocols.initialize_single_hop(channel, k=args.k, rng=RngStream(args.seed, args.n))
        print(f"slots={res.slots} rounds={res.rounds}")
        for node in range(args.n):
            print(f"{node} -> {res.assignment[node]}")
        return EXIT_OK

    if args.protocol == "init-multi":
        net = _load_net(args.net)
        eps = args.epsilon if args.epsilon is not None else experiments.sfr_epsilon_for(net.n)
        res = protocols.initialize_multihop(net, eps, args.seed, r_max=args.rmax)
        print(
            f"charged_slots={res.charged_slots} p_hat={res.p_hat} "
            f"iterations={res.iterations} consensus={res.consensus}"
        )
        for node in range(net.n):
            print(f"{node} -> {res.assignment[node]}")
        return EXIT_OK

    raise CliError(f"unknown protocol {args.protocol}", EXIT_USAGE)


def cmd_experiment(args) -> int:
    config = experiments.load_config(args.config)
    name = args.name
    if name == "send":
        if args.T is None or args.d is None:
            raise CliError("experiment send needs --T and --d", EXIT_USAGE)
        records, summary = experiments.exp_send(
            args.T, args.d, args.base, args.trials, args.seed, config
        )
    elif name == "degree-diameter":
        records, summary = experiments.exp_degree_diameter(
            args.n, args.ell, args.trials, args.seed, config
        )
    elif name == "lens":
        records, summary = experiments.exp_lens_occupancy(
            args.n, args.ell, args.trials, args.seed, config
        )
    elif name == "init":
        records, summary = experiments.exp_equipartition_init(
            args.n, args.k, args.trials, args.seed, config
        )
    elif name == "pipeline-scaling":
        if not args.ns:
            raise CliError("experiment pipeline-scaling needs --ns", EXIT_USAGE)
        n_list = [int(x) for x in args.ns.split(",")]
        records, summary = experiments.exp_pipeline_scaling(
            n_list, args.ell, args.epsilon, args.trials, args.seed, config
        )
    else:
        raise CliError(f"unknown experiment {name}", EXIT_USAGE)
    try:
        experiments.write_csv(records, summary, args.csv)
    except OSError as exc:
        raise CliError(f"cannot write {args.csv}: {exc}", EXIT_IO)
    print(
        f"{summary.experiment}: trials={summary.trials} mean={summary.mean:.12g} "
        f"fraction_within_bound={summary.fraction_within_bound:.12g} pass={summary.passed}"
    )
    return EXIT_OK if summary.passed else EXIT_THRESHOLD


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="radinit",
        description="random radio-network initialization: generation, simulation, experiments",
    )
    sub = top.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a network file")
    g.add_argument("--n", type=int, required=True, help="node count")
    g.add_argument("--side", type=float, required=True, help="square side (meters)")
    g.add_argument("--ell", type=float, help="superconnectivity margin; sets the radius")
    g.add_argument("--radius", type=float, help="explicit transmission radius (meters)")
    g.add_argument("--seed", type=int, required=True, help="placement seed")
    g.add_argument("--out", required=True, help="output network file (JSON)")
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("analyze", help="measure a network file against the analytic bounds")
    a.add_argument("--net", required=True, help="network file")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="run one protocol instance")
    s.add_argument(
        "protocol", choices=["send", "broadcast", "sfr", "init-single", "init-multi"]
    )
    s.add_argument("--net", help="network file (multihop protocols)")
    s.add_argument("--n", type=int, help="station count (send star / init-single)")
    s.add_argument("--d", type=int, help="star leaf count for send")
    s.add_argument("--T", type=int, help="send horizon (slots 0..T)")
    s.add_argument("--base", type=float, default=2.0, help="send probability base (default 2)")
    s.add_argument("--epsilon", type=float, help="failure budget (default n^-4)")
    s.add_argument("--k", type=int, default=3, help="equipartition arity (default 3)")
    s.add_argument("--rmax", type=float, help="maximum transmission radius (default: side)")
    s.add_argument("--seed", type=int, required=True, help="simulation seed")
    s.add_argument("--trace", action="store_true", help="dump the per-slot trace")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("experiment", help="run a Monte-Carlo experiment, write CSV")
    e.add_argument(
        "name", choices=["send", "degree-diameter", "lens", "init", "pipeline-scaling"]
    )
    e.add_argument("--n", type=int, help="node count")
    e.add_argument("--ns", help="comma-separated node counts (pipeline-scaling)")
    e.add_argument("--ell", type=float, default=1.0, help="superconnectivity margin (default 1)")
    e.add_argument("--epsilon", type=float, help="failure budget (default n^-4)")
    e.add_argument("--T", type=int, help="send horizon")
    e.add_argument("--d", type=int, help="send star leaf count")
    e.add_argument("--base", type=float, default=2.0, help="send probability base (default 2)")
    e.add_argument("--k", type=int, default=3, help="equipartition arity (default 3)")
    e.add_argument("--trials", type=int, required=True, help="trial count")
    e.add_argument("--seed", type=int, required=True, help="master seed")
    e.add_argument("--csv", required=True, help="output CSV path")
    e.add_argument("--config", help="JSON file overriding the packaged thresholds")
    e.set_defaults(func=cmd_experiment)
    return top


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
