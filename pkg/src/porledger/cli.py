"""``porledger`` command line.

State lives in an output directory (``--out``, default ``./porledger-out``)
written by ``init`` or ``run``; the inspection commands read it back and never
trust it: every load goes through the strict parsers.

Exit codes: 0 success, 1 verification failed, 2 usage or parse error,
3 protocol error while running a scenario, 4 missing state.
Failures print one ``error category=<Name> message=<text>`` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from porledger import errors
from porledger.canonical import hash_bytes, hexs, unhex
from porledger.graph import node_to_json, parse_nodelink, render_dot, render_nodelink, verify_nodelink_text
from porledger.ledger import load_balances, parse_export, verify_export_text
from porledger.policy import PolicyConfig, parse_policy
from porledger.scenario import bundled_scenarios, load_script, run_scenario

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_PROTOCOL, EXIT_STATE = 0, 1, 2, 3, 4
DEFAULT_OUT = "porledger-out"


class MissingState(errors.ProtocolError):
    pass


class VerificationFailed(errors.ProtocolError):
    pass


def _fail(exc: errors.ProtocolError | Exception, category: str | None = None) -> None:
    cat = category or getattr(exc, "category", type(exc).__name__)
    message = " ".join(str(exc).split())
    print(f"error category={cat} message={message}", file=sys.stderr)


def _policy(args) -> PolicyConfig | None:
    if not args.policy:
        return None
    return parse_policy(Path(args.policy).read_text())


def _read(out: Path, name: str) -> str:
    path = out / name
    if not path.is_file():
        raise MissingState(f"{path} not found; run `porledger init` or `porledger run` first")
    try:
        return path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise errors.ParseError(f"{path}: not valid UTF-8 ({exc.reason} at byte {exc.start})") from None


def read_report(out: Path) -> dict[str, str]:
    pairs = {}
    for line in _read(out, "report.txt").splitlines():
        key, sep, value = line.partition("=")
        if sep:
            pairs[key] = value
    return pairs


def _resolve(report: dict[str, str], kind: str, ref: str, field: str) -> bytes:
    """Name from the report, or a raw hex value."""
    key = f"{kind}.{ref}.{field}"
    if key in report:
        return unhex(report[key], 32)
    try:
        return unhex(ref, 32)
    except (ValueError, errors.ProtocolError):
        raise errors.UnknownAddress(f"no {kind} named {ref!r}") from None


# -- commands ------------------------------------------------------------


def cmd_run(args) -> int:
    script = "" if args.command == "init" else load_script(args.script)
    report = run_scenario(script, args.out, seed=args.seed, policy=_policy(args), stop_after=args.stop_after)
    if args.command == "init":
        print(f"initialised {args.out}")
    print(f"ledger_digest={hexs(report.ledger_digest)}")
    print(f"state_digest={hexs(report.state_digest)}")
    for name, state in report.node_states.items():
        print(f"manuscript {name} {state}")
    return EXIT_OK


def cmd_balance(args) -> int:
    out = Path(args.out)
    _, balances = load_balances(_read(out, "ledger.txt"))
    addr = _resolve(read_report(out), "user", args.user, "address")
    if addr not in balances:
        raise errors.UnknownAddress(hexs(addr))
    spendable, escrowed = balances[addr]
    print(f"{args.user} address={hexs(addr)} spendable={spendable} escrowed={escrowed}")
    return EXIT_OK


def cmd_show(args) -> int:
    out = Path(args.out)
    _, nodes, _ = parse_nodelink(_read(out, "graph.jsonl"))
    report = read_report(out)
    key = f"manuscript.{args.manuscript}.origin"
    ref = unhex(report[key], 32) if key in report else _resolve(report, "manuscript", args.manuscript, "id")
    for node in nodes:
        if ref in (node.origin, node.id):
            print(json.dumps(node_to_json(node), sort_keys=True, indent=2))
            return EXIT_OK
    raise errors.UnknownManuscript(args.manuscript)


def cmd_verify(args) -> int:
    out = Path(args.out)
    try:
        ledger_text = _read(out, "ledger.txt")
        graph_text = _read(out, "graph.jsonl")
    except errors.ParseError as exc:
        print(f"violation {exc}")
        _fail(VerificationFailed("unreadable export"))
        return EXIT_VERIFY
    violations = list(verify_export_text(ledger_text).violations)
    try:
        keys = parse_export(ledger_text).keys
    except errors.ParseError:
        keys = {}
    violations += verify_nodelink_text(graph_text, keys).violations
    report_path = out / "report.txt"
    if report_path.is_file():
        report = read_report(out)
        for key, text in (("ledger_digest", ledger_text), ("graph_digest", graph_text)):
            if key in report and report[key] != hexs(hash_bytes(text.encode())):
                violations.append(f"report: {key} does not match the exported file")
    for v in violations:
        print(f"violation {v}")
    if violations:
        _fail(VerificationFailed(f"{len(violations)} violation(s)"))
        return EXIT_VERIFY
    print("ok")
    return EXIT_OK


def cmd_export(args) -> int:
    out = Path(args.out)
    if args.format not in ("nodelink", "dot"):
        raise errors.UnknownFormat(f"unknown export format {args.format!r}; use nodelink or dot")
    genesis_id, nodes, _ = parse_nodelink(_read(out, "graph.jsonl"))
    if args.format == "nodelink":
        text = render_nodelink(genesis_id, nodes)
    else:
        report = read_report(out)
        labels = {
            unhex(v, 32): k.split(".")[1]
            for k, v in report.items()
            if k.startswith("manuscript.") and k.endswith(".origin")
        }
        text = render_dot(nodes, labels)
    if args.file:
        Path(args.file).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_scenarios(args) -> int:
    for name in sorted(bundled_scenarios()):
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=DEFAULT_OUT, help="state/output directory")
    run_opts = argparse.ArgumentParser(add_help=False)
    run_opts.add_argument("--seed", type=int, help="override the script seed (u64)")
    run_opts.add_argument("--policy", help="policy file of key=value lines")
    run_opts.add_argument("--stop-after", type=int, help="run only the first N steps")

    p = argparse.ArgumentParser(prog="porledger", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("init", parents=[common, run_opts], help="write a genesis-only state")
    s.set_defaults(func=cmd_run)
    s = sub.add_parser("run", parents=[common, run_opts], help="run a scenario file or bundled scenario")
    s.add_argument("script")
    s.set_defaults(func=cmd_run)
    s = sub.add_parser("balance", parents=[common], help="spendable and escrowed balance of a user")
    s.add_argument("user", help="user name from the scenario, or hex address")
    s.set_defaults(func=cmd_balance)
    s = sub.add_parser("show", parents=[common], help="print a manuscript node as JSON")
    s.add_argument("manuscript", help="manuscript name, or hex origin or node id")
    s.set_defaults(func=cmd_show)
    s = sub.add_parser("verify", parents=[common], help="check ledger and graph exports")
    s.set_defaults(func=cmd_verify)
    s = sub.add_parser("export", parents=[common], help="re-render the graph as nodelink or dot")
    s.add_argument("format")
    s.add_argument("--file", help="write here instead of stdout")
    s.set_defaults(func=cmd_export)
    s = sub.add_parser("scenarios", help="list bundled scenarios")
    s.set_defaults(func=cmd_scenarios)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MissingState as exc:
        _fail(exc)
        return EXIT_STATE
    except errors.ParseError as exc:
        _fail(exc)
        return EXIT_USAGE
    except errors.UnknownFormat as exc:
        _fail(exc)
        return EXIT_USAGE
    except errors.ProtocolError as exc:
        _fail(exc)
        return EXIT_PROTOCOL
    except FileNotFoundError as exc:
        _fail(exc, "FileNotFound")
        return EXIT_STATE


if __name__ == "__main__":
    sys.exit(main())
