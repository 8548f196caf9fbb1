import json
import re

import pytest

from porledger import cli, errors
from porledger.graph import parse_nodelink
from porledger.scenario import bundled_scenarios, load_script, parse_script, run_scenario

DOT_NODE = re.compile(r'^  "([0-9a-f]{64})" \[label="([^"]+)"\];$')
DOT_EDGE = re.compile(r'^  "([0-9a-f]{64})" -> "([0-9a-f]{64})";$')


@pytest.fixture(scope="module")
def two_papers(tmp_path_factory):
    out = tmp_path_factory.mktemp("two-papers")
    return out, run_scenario(load_script("two-papers"), out)


def test_empty_script_is_genesis_only():
    r = run_scenario("")
    assert r.steps_run == 0 and r.node_states == {"genesis": "confirmed"}
    assert r.state_digest == run_scenario("").state_digest


def test_parse_error_reports_line():
    with pytest.raises(errors.ParseError, match="line 2"):
        parse_script("seed 1\nfly-away now\n")
    with pytest.raises(errors.ParseError):
        parse_script("create-user a\nseed 3\n")
    with pytest.raises(errors.ParseError):
        parse_script("sign-contract nope\n")


def test_protocol_error_wrapped_with_step():
    script = "create-user a\npropose-contract c authorship parties=a stake=5000\nsign-contract c\n"
    with pytest.raises(errors.ScenarioError) as info:
        run_scenario(script)
    assert info.value.step == 3 and isinstance(info.value.cause, errors.InsufficientFunds)


def test_two_papers_outcome(two_papers):
    out, r = two_papers
    assert r.node_states == {"genesis": "confirmed", "m1": "confirmed", "m2": "confirmed"}
    assert {n: b[0] for n, b in r.balances.items()} == {"alice": 60, "bob": 20, "carol": 109, "dave": 119, "erin": 102}
    eco = r.ecosystem
    ids = {n: eco.graph.node(o).id for n, o in r.runner.manuscripts.items()}
    _, _, links = parse_nodelink((out / "graph.jsonl").read_text())
    assert sorted(links) == sorted([(ids["m1"], ids["genesis"]), (ids["m2"], ids["m1"]), (ids["m2"], ids["genesis"])])


def test_dot_is_regex_parseable(two_papers):
    out, r = two_papers
    lines = (out / "graph.dot").read_text().splitlines()
    assert lines[0] == "digraph publication {" and lines[-1] == "}"
    nodes = [DOT_NODE.match(l) for l in lines[1:-1] if "->" not in l]
    edges = [DOT_EDGE.match(l) for l in lines[1:-1] if "->" in l]
    assert all(nodes) and all(edges)
    assert {m.group(2) for m in nodes} == {"genesis v1 confirmed", "m1 v1 confirmed", "m2 v1 confirmed"}
    assert len(edges) == 3


def test_stop_after_gives_ledger_prefix(tmp_path):
    script = load_script("two-papers")
    full = run_scenario(script).ecosystem.ledger.export_text()
    part = run_scenario(script, tmp_path, stop_after=15)
    tx = lambda text: [l for l in text.splitlines() if l.startswith("tx ")]
    assert tx(full)[: len(tx(part.ecosystem.ledger.export_text()))] == tx(part.ecosystem.ledger.export_text())
    assert cli.main(["verify", "--out", str(tmp_path)]) == cli.EXIT_OK


# -- CLI -----------------------------------------------------------------------


def test_cli_init_and_export(tmp_path, capsys):
    assert cli.main(["init", "--out", str(tmp_path), "--seed", "5"]) == 0
    capsys.readouterr()
    assert cli.main(["export", "nodelink", "--out", str(tmp_path)]) == 0
    _, nodes, links = parse_nodelink(capsys.readouterr().out)
    assert len(nodes) == 1 and links == []


def test_cli_balance_matches_report(two_papers, capsys):
    out, _ = two_papers
    report = cli.read_report(out)
    assert cli.main(["balance", "carol", "--out", str(out)]) == 0
    line = capsys.readouterr().out.strip()
    assert f"spendable={report['user.carol.spendable']}" in line
    assert f"escrowed={report['user.carol.escrowed']}" in line


def test_cli_show_prints_json(two_papers, capsys):
    out, r = two_papers
    assert cli.main(["show", "m2", "--out", str(out)]) == 0
    node = json.loads(capsys.readouterr().out)
    assert node["state"] == "confirmed" and len(node["citations"]) == 2


def test_cli_verify_pristine_and_tampered(tmp_path, capsys):
    run_scenario(load_script("two-papers"), tmp_path)
    assert cli.main(["verify", "--out", str(tmp_path)]) == cli.EXIT_OK
    ledger = tmp_path / "ledger.txt"
    text = ledger.read_text()
    assert " 130 " in text
    ledger.write_text(text.replace(" 130 ", " 131 ", 1))
    assert cli.main(["verify", "--out", str(tmp_path)]) == cli.EXIT_VERIFY
    assert "error category=" in capsys.readouterr().err


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text("create-user a\nfrobnicate\n")
    assert cli.main(["run", str(bad), "--out", str(tmp_path / "o")]) == cli.EXIT_USAGE
    poor = tmp_path / "poor.scn"
    poor.write_text("create-user a\npropose-contract c authorship parties=a stake=5000\nsign-contract c\n")
    assert cli.main(["run", str(poor), "--out", str(tmp_path / "o")]) == cli.EXIT_PROTOCOL
    assert cli.main(["balance", "a", "--out", str(tmp_path / "missing")]) == cli.EXIT_STATE
    assert cli.main(["export", "svg", "--out", str(tmp_path / "missing")]) == cli.EXIT_USAGE
    err = capsys.readouterr().err
    assert err.count("error category=") == 4


def test_cli_lists_scenarios(capsys):
    assert cli.main(["scenarios"]) == 0
    listed = capsys.readouterr().out.split()
    assert listed == sorted(bundled_scenarios()) and {"two-papers", "ten-users"} <= set(listed)


def test_cli_run_prints_digests(tmp_path, capsys):
    assert cli.main(["run", "two-papers", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert re.search(r"^ledger_digest=[0-9a-f]{64}$", out, re.M)
    assert "manuscript m2 confirmed" in out
