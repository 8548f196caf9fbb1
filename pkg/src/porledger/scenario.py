"""Line-oriented scenario scripts and the deterministic runner.

One command per line, shell-style quoting, ``#`` comments. Entities are
declared by name and referenced by name afterwards; ``genesis`` names the
genesis manuscript. Example::

    seed 7
    policy K=2
    create-user alice name="Alice A." keywords=ledgers,review roles=author
    create-user bob keywords=ledgers optin
    propose-contract c1 authorship parties=alice
    sign-contract c1
    submit m1 contract=c1 content="draft one" cites=genesis keywords=ledgers
    propose-contract r1 review parties=bob target=m1
    sign-contract r1
    review m1 bob confirm report="sound"

``seed`` and ``policy`` may only appear before the first other command.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from porledger import errors
from porledger.canonical import hash_bytes, hexs
from porledger.contracts import ContractKind, ContractTerms
from porledger.ecosystem import Ecosystem
from porledger.graph import ManuscriptState, RemarkKind, Verdict
from porledger.identity import parse_profile_record
from porledger.policy import PolicyConfig

GENESIS_NAME = "genesis"

# command -> (min positionals, max positionals or None, allowed options or None for free-form)
COMMANDS: dict[str, tuple[int, int | None, frozenset[str] | None]] = {
    "seed": (1, 1, frozenset()),
    "policy": (0, 0, None),
    "create-user": (1, 1, None),
    "update-profile": (1, 1, None),
    "propose-contract": (
        2,
        2,
        frozenset({"parties", "shares", "stake", "target", "covered", "clawback", "venue", "k", "whitelist"}),
    ),
    "sign-contract": (1, None, frozenset()),
    "cancel-contract": (1, None, frozenset()),
    "submit": (1, 1, frozenset({"contract", "content", "cites", "keywords"})),
    "revise": (1, 1, frozenset({"content", "cites", "authors"})),
    "select-reviewers": (1, 1, frozenset()),
    "review": (3, 3, frozenset({"report"})),
    "attach-remark": (2, 2, frozenset({"kind", "terms"})),
    "withdraw": (1, 1, frozenset()),
    "advance-tick": (0, 1, frozenset()),
}


@dataclass(frozen=True)
class Step:
    line: int
    command: str
    args: tuple[str, ...]
    opts: dict = field(hash=False)


@dataclass(frozen=True)
class ScenarioScript:
    seed: int
    policy_overrides: dict
    steps: tuple[Step, ...]


def _split_list(value: str) -> list[str]:
    return [v for v in value.split(",") if v]


def parse_script(text: str) -> ScenarioScript:
    """Parse and statically check name references; raises ParseError."""
    seed, overrides, steps = 0, {}, []
    users: set[str] = set()
    contracts: dict[str, str] = {}
    manuscripts = {GENESIS_NAME}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        try:
            tokens = shlex.split(raw, comments=True)
        except ValueError as exc:
            raise errors.ParseError(str(exc), lineno) from None
        if not tokens:
            continue
        cmd, rest = tokens[0], tokens[1:]
        if cmd not in COMMANDS:
            raise errors.ParseError(f"unknown command {cmd!r}", lineno)
        lo, hi, allowed = COMMANDS[cmd]
        args = [t for t in rest if "=" not in t]
        opts = {}
        for t in rest:
            if "=" in t:
                k, _, v = t.partition("=")
                if k in opts:
                    raise errors.ParseError(f"option {k!r} given twice", lineno)
                opts[k] = v
        if cmd in ("create-user", "update-profile"):
            # profile fields are free-form; only the first bare token is the name
            args, opts = rest[:1], {"profile": rest[1:]}
        if not lo <= len(args) <= (hi if hi is not None else len(args)):
            raise errors.ParseError(f"{cmd}: wrong number of arguments", lineno)
        if allowed is not None:
            unknown = set(opts) - allowed
            if unknown:
                raise errors.ParseError(f"{cmd}: unknown option(s) {sorted(unknown)}", lineno)

        if cmd in ("seed", "policy"):
            if steps:
                raise errors.ParseError(f"{cmd} must come before the first step", lineno)
            if cmd == "seed":
                try:
                    seed = int(args[0])
                except ValueError:
                    raise errors.ParseError("seed must be an integer", lineno) from None
                if not 0 <= seed < 2**64:
                    raise errors.ParseError("seed must fit in 64 bits", lineno)
            else:
                overrides.update(opts)
            continue

        def need(kind: str, name: str, pool) -> None:
            if name not in pool:
                raise errors.ParseError(f"unknown {kind} {name!r}", lineno)

        if cmd == "create-user":
            if args[0] in users:
                raise errors.ParseError(f"user {args[0]!r} already declared", lineno)
            users.add(args[0])
        elif cmd == "update-profile":
            need("user", args[0], users)
        elif cmd == "propose-contract":
            name, kind = args
            if name in contracts:
                raise errors.ParseError(f"contract {name!r} already declared", lineno)
            try:
                ContractKind(kind)
            except ValueError:
                raise errors.ParseError(f"unknown contract kind {kind!r}", lineno) from None
            if "parties" not in opts:
                raise errors.ParseError("propose-contract needs parties=", lineno)
            for u in _split_list(opts["parties"]) + _split_list(opts.get("whitelist", "")):
                need("user", u, users)
            if kind == "review":
                need("manuscript", opts.get("target", ""), manuscripts)
            elif kind in ("funding", "indexing"):
                if contracts.get(opts.get("target", "")) != "authorship":
                    raise errors.ParseError(f"{kind} contracts target an authorship contract", lineno)
            contracts[name] = kind
        elif cmd in ("sign-contract", "cancel-contract"):
            need("contract", args[0], contracts)
            for u in args[1:]:
                need("user", u, users)
        elif cmd == "submit":
            if args[0] in manuscripts:
                raise errors.ParseError(f"manuscript {args[0]!r} already declared", lineno)
            if contracts.get(opts.get("contract", "")) != "authorship":
                raise errors.ParseError("submit needs contract=<authorship contract>", lineno)
            for m in _split_list(opts.get("cites", "")):
                need("manuscript", m, manuscripts)
            manuscripts.add(args[0])
        elif cmd == "revise":
            need("manuscript", args[0], manuscripts)
            for m in _split_list(opts.get("cites", "")):
                need("manuscript", m, manuscripts)
            for item in _split_list(opts.get("authors", "")):
                need("user", item.partition(":")[0], users)
        elif cmd in ("select-reviewers", "withdraw"):
            need("manuscript", args[0], manuscripts)
        elif cmd == "review":
            need("manuscript", args[0], manuscripts)
            need("user", args[1], users)
            if args[2] not in ("confirm", "revise"):
                raise errors.ParseError("verdict must be confirm or revise", lineno)
        elif cmd == "attach-remark":
            need("manuscript", args[0], manuscripts)
            need("contract", args[1], contracts)
        elif cmd == "advance-tick" and args and not args[0].isdigit():
            raise errors.ParseError("advance-tick takes a non-negative integer", lineno)
        steps.append(Step(lineno, cmd, tuple(args), opts))
    return ScenarioScript(seed, overrides, tuple(steps))


def _fraction(text: str, line: int) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise errors.ParseError(f"bad fraction {text!r}", line) from None


def _int(text: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise errors.ParseError(f"bad integer {text!r}", line) from None


class ScenarioRunner:
    """Executes parsed steps against one :class:`Ecosystem`, tracking names."""

    def __init__(self, policy: PolicyConfig, seed: int):
        self.eco = Ecosystem(policy, seed)
        self.users: dict[str, bytes] = {}
        self.contracts: dict[str, bytes] = {}
        self.manuscripts: dict[str, bytes] = {GENESIS_NAME: self.eco.graph.genesis}
        self.audit: list[str] = []
        self.selections: list[str] = []
        self.audit_reports: list[int] = []

    def node_id(self, name: str) -> bytes:
        return self.eco.graph.node(self.manuscripts[name]).id

    def run_step(self, step: Step) -> None:
        getattr(self, "_" + step.command.replace("-", "_"))(step)

    def _create_user(self, step: Step) -> None:
        profile = parse_profile_record(step.opts["profile"])
        self.users[step.args[0]] = self.eco.create_user(profile, name=step.args[0]).address

    def _update_profile(self, step: Step) -> None:
        self.eco.update_profile(self.users[step.args[0]], parse_profile_record(step.opts["profile"]))

    def _propose_contract(self, step: Step) -> None:
        name, kind = step.args
        o = step.opts
        parties = [self.users[u] for u in _split_list(o["parties"])]
        shares = None
        if "shares" in o:
            fracs = [_fraction(s, step.line) for s in _split_list(o["shares"])]
            if len(fracs) != len(parties):
                raise errors.InvalidShares("one share per party")
            shares = list(zip(parties, fracs))
        terms = ContractTerms(
            covered_fraction=_fraction(o.get("covered", "0"), step.line),
            clawback_share=_fraction(o.get("clawback", "0"), step.line),
            venue=o.get("venue", ""),
            k_override=_int(o["k"], step.line) if "k" in o else None,
            whitelist=tuple(self.users[u] for u in _split_list(o["whitelist"])) if "whitelist" in o else None,
        )
        target = None
        if kind == "review":
            target = self.manuscripts[o["target"]]
        elif kind in ("funding", "indexing"):
            target = self.contracts[o["target"]]
        stake = _int(o["stake"], step.line) if "stake" in o else None
        contract = self.eco.propose_contract(ContractKind(kind), parties, shares, stake, terms, target=target)
        self.contracts[name] = contract.id

    def _sign_contract(self, step: Step) -> None:
        cid = self.contracts[step.args[0]]
        contract = self.eco.contract(cid)
        signers = [self.users[u] for u in step.args[1:]] or [
            p for p in contract.parties if p not in contract.signed_by
        ]
        for party in signers:
            self.eco.sign_contract(cid, party)

    def _cancel_contract(self, step: Step) -> None:
        quorum = [self.users[u] for u in step.args[1:]] or None
        self.eco.cancel_contract(self.contracts[step.args[0]], quorum)

    def _submit(self, step: Step) -> None:
        o = step.opts
        cites = [self.node_id(m) for m in _split_list(o.get("cites", ""))]
        node = self.eco.submit(
            self.contracts[o["contract"]], o.get("content", ""), cites, _split_list(o.get("keywords", ""))
        )
        self.manuscripts[step.args[0]] = node.origin

    def _revise(self, step: Step) -> None:
        o = step.opts
        cites = [self.node_id(m) for m in _split_list(o["cites"])] if "cites" in o else None
        authors = None
        if "authors" in o:
            authors = []
            for item in _split_list(o["authors"]):
                user, _, share = item.partition(":")
                authors.append((self.users[user], _fraction(share or "0", step.line)))
        self.eco.revise(self.manuscripts[step.args[0]], o.get("content", ""), cites, authors)

    def _select_reviewers(self, step: Step) -> None:
        chosen = self.eco.invite(self.manuscripts[step.args[0]])
        names = {a: n for n, a in self.users.items()}
        self.selections.append(f"{step.args[0]} " + ",".join(names[a] for a in chosen))

    def _review(self, step: Step) -> None:
        origin = self.manuscripts[step.args[0]]
        self.eco.review(origin, self.users[step.args[1]], Verdict(step.args[2]), step.opts.get("report", ""))
        self._after_change(origin)

    def _attach_remark(self, step: Step) -> None:
        kind = RemarkKind(step.opts["kind"]) if "kind" in step.opts else None
        self.eco.attach_remark(
            self.manuscripts[step.args[0]], self.contracts[step.args[1]], kind, step.opts.get("terms", "")
        )

    def _withdraw(self, step: Step) -> None:
        self.eco.withdraw(self.manuscripts[step.args[0]])
        self._collect_reports()

    def _advance_tick(self, step: Step) -> None:
        self.eco.advance_tick(int(step.args[0]) if step.args else 1)

    def _after_change(self, origin: bytes) -> None:
        self.eco.try_confirm(origin)
        self._collect_reports()

    def _collect_reports(self) -> None:
        for seq in range(len(self.audit_reports) + 1, len(self.eco.reports) + 1):
            self.audit_reports.append(seq)
            self.audit.extend(self.eco.reports[seq - 1].audit_lines(seq))


@dataclass(frozen=True)
class ScenarioReport:
    seed: int
    policy: PolicyConfig
    steps_run: int
    balances: dict  # name -> (spendable, escrowed)
    node_states: dict  # name -> state value
    audit: tuple[str, ...]
    ledger_digest: bytes
    graph_digest: bytes
    state_digest: bytes
    runner: ScenarioRunner = field(repr=False, compare=False)

    @property
    def ecosystem(self) -> Ecosystem:
        return self.runner.eco

    def report_lines(self) -> list[str]:
        eco = self.ecosystem
        out = [f"seed={self.seed}", f"steps={self.steps_run}", f"tick={eco.clock.tick}"]
        out += [f"policy.{line}" for line in self.policy.to_lines()]
        sp, esc = eco.ledger.balance_of(eco.treasury)
        out += [f"treasury={hexs(eco.treasury)}", f"treasury.spendable={sp}", f"treasury.escrowed={esc}"]
        for name, addr in self.runner.users.items():
            sp, esc = self.balances[name]
            out += [f"user.{name}.address={hexs(addr)}", f"user.{name}.spendable={sp}", f"user.{name}.escrowed={esc}"]
        for name, origin in self.runner.manuscripts.items():
            node = eco.graph.node(origin)
            out += [
                f"manuscript.{name}.origin={hexs(origin)}",
                f"manuscript.{name}.id={hexs(node.id)}",
                f"manuscript.{name}.state={node.state.value}",
                f"manuscript.{name}.version={node.version}",
            ]
        for name, cid in self.runner.contracts.items():
            out.append(f"contract.{name}.state={eco.contract(cid).state.value}")
        out += [
            f"total_spendable={eco.ledger.total_spendable()}",
            f"total_escrowed={eco.ledger.total_escrowed()}",
            f"total_supply={eco.ledger.total_supply}",
            f"settlements={len(eco.reports)}",
            f"ledger_digest={hexs(self.ledger_digest)}",
            f"graph_digest={hexs(self.graph_digest)}",
            f"state_digest={hexs(self.state_digest)}",
        ]
        return out

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        eco = self.ecosystem
        labels = {o: n for n, o in self.runner.manuscripts.items()}
        (out / "ledger.txt").write_text(eco.ledger.export_text())
        (out / "graph.jsonl").write_text(eco.graph.export_nodelink())
        (out / "graph.dot").write_text(eco.graph.export_dot(labels))
        (out / "audit.log").write_text("".join(line + "\n" for line in self.audit))
        (out / "report.txt").write_text("".join(line + "\n" for line in self.report_lines()))


def run_scenario(
    script: str,
    out_dir: str | Path | None = None,
    *,
    seed: int | None = None,
    policy: PolicyConfig | None = None,
    stop_after: int | None = None,
) -> ScenarioReport:
    """Run ``script`` (text). ``seed``/``policy`` override the script's own;
    script ``policy`` lines are applied on top of ``policy``. ``stop_after``
    runs only the first n steps."""
    parsed = parse_script(script)
    base = policy or PolicyConfig()
    try:
        pol = base.with_overrides(parsed.policy_overrides)
    except errors.InvalidPolicy as exc:
        raise errors.ParseError(str(exc)) from None
    runner = ScenarioRunner(pol, parsed.seed if seed is None else seed)
    steps = parsed.steps if stop_after is None else parsed.steps[:stop_after]
    for index, step in enumerate(steps, start=1):
        try:
            runner.run_step(step)
        except errors.ScenarioError:
            raise
        except errors.ProtocolError as exc:
            raise errors.ScenarioError(index, step.line, exc) from exc
    eco = runner.eco
    report = ScenarioReport(
        seed=runner.eco.seed,
        policy=pol,
        steps_run=len(steps),
        balances={n: eco.ledger.balance_of(a) for n, a in runner.users.items()},
        node_states={n: eco.graph.node(o).state.value for n, o in runner.manuscripts.items()},
        audit=tuple(runner.audit),
        ledger_digest=hash_bytes(eco.ledger.export_text().encode()),
        graph_digest=hash_bytes(eco.graph.export_nodelink().encode()),
        state_digest=eco.state_digest(),
        runner=runner,
    )
    if out_dir is not None:
        report.write(out_dir)
    return report


def bundled_scenarios() -> dict[str, str]:
    """Name -> script text for the scenarios shipped with the package."""
    from importlib import resources

    root = resources.files("porledger") / "scenarios"
    return {p.name[: -len(".scn")]: p.read_text() for p in root.iterdir() if p.name.endswith(".scn")}


def load_script(name_or_path: str) -> str:
    path = Path(name_or_path)
    if path.is_file():
        return path.read_text()
    bundled = bundled_scenarios()
    if name_or_path in bundled:
        return bundled[name_or_path]
    raise FileNotFoundError(f"no scenario file or bundled scenario named {name_or_path!r}")


def manuscript_state(report: ScenarioReport, name: str) -> ManuscriptState:
    return ManuscriptState(report.node_states[name])
