"""Publication graph: content-addressed manuscript nodes and citation edges.

A node carries four components (authorship, confirmations, remarks, meta)
plus its citation set and lifecycle state. Its id is the hash of the
canonical encoding of all of that, including every author, reviewer and
remark-agent signature, so any mutation produces a new id.

Nodes also carry a stable ``origin`` handle, derived from the authorship
contract, which contracts and escrows use to refer to a manuscript whose id
is still moving. Once a node is confirmed its id is frozen and becomes the
identifier other manuscripts cite.
"""

from __future__ import annotations

import enum
import graphlib
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping

from porledger import errors
from porledger.canonical import ZERO_HASH, digest, encode, hash_bytes, hexs, unhex
from porledger.crypto import verify_signature
from porledger.ledger import Report

GRAPH_FORMAT = "porledger-graph"


class ManuscriptState(str, enum.Enum):
    UNDER_REVIEW = "under-review"
    CONFIRMED = "confirmed"
    WITHDRAWN = "withdrawn"


class Verdict(str, enum.Enum):
    CONFIRM = "confirm"
    REVISE = "revise"


class RemarkKind(str, enum.Enum):
    FUNDING = "funding"
    PROOFREADING = "proofreading"
    INDEXING = "indexing"
    OTHER = "other"


# ---------------------------------------------------------------------------
# Merkle tree over citation ids
# ---------------------------------------------------------------------------


def merkle_root(citation_ids: Iterable[bytes]) -> bytes:
    leaves = sorted(set(citation_ids))
    if not leaves:
        return hash_bytes(b"")
    level = [hash_bytes(b"\x00" + leaf) for leaf in leaves]
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [hash_bytes(b"\x01" + level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


# ---------------------------------------------------------------------------
# Components
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuthorshipComponent:
    authors: tuple[tuple[bytes, Fraction], ...]
    author_stake: int
    contract: bytes
    signatures: tuple[tuple[bytes, bytes], ...] = ()

    @property
    def addresses(self) -> tuple[bytes, ...]:
        return tuple(a for a, _ in self.authors)

    def unsigned_record(self) -> dict:
        return {
            "authors": [[a, s] for a, s in self.authors],
            "author_stake": self.author_stake,
            "contract": self.contract,
        }


@dataclass(frozen=True)
class ReviewRecord:
    reviewer: bytes
    contract: bytes
    stake: int
    report: str
    verdict: Verdict
    version_signed: int
    signed_digest: bytes
    signature: bytes = b""

    def message(self) -> bytes:
        return review_message(self.signed_digest, self.version_signed, self.report, self.verdict)

    def record(self) -> dict:
        return {
            "reviewer": self.reviewer,
            "contract": self.contract,
            "stake": self.stake,
            "report": self.report,
            "verdict": self.verdict.value,
            "version_signed": self.version_signed,
            "signed_digest": self.signed_digest,
            "signature": self.signature,
        }


def review_message(signed_digest: bytes, version: int, report: str, verdict: Verdict) -> bytes:
    return encode(
        {"review-of": signed_digest, "version": version, "report": report, "verdict": Verdict(verdict).value}
    )


@dataclass(frozen=True)
class RemarkEntry:
    agent: bytes
    kind: RemarkKind
    contract: bytes
    stake: int
    terms_digest: bytes
    signature: bytes = b""

    def message(self, origin: bytes) -> bytes:
        return remark_message(origin, self.agent, self.kind, self.contract, self.stake, self.terms_digest)

    def record(self) -> dict:
        return {
            "agent": self.agent,
            "kind": self.kind.value,
            "contract": self.contract,
            "stake": self.stake,
            "terms_digest": self.terms_digest,
            "signature": self.signature,
        }


def remark_message(origin, agent, kind, contract, stake, terms_digest) -> bytes:
    return encode(
        {
            "remark-on": origin,
            "agent": agent,
            "kind": RemarkKind(kind).value,
            "contract": contract,
            "stake": stake,
            "terms_digest": terms_digest,
        }
    )


@dataclass(frozen=True)
class ManuscriptMeta:
    version: int
    timestamp: int
    citation_merkle_root: bytes
    content_digest: bytes
    keywords: frozenset[str] = frozenset()

    def record(self) -> dict:
        return {
            "version": self.version,
            "timestamp": self.timestamp,
            "citation_merkle_root": self.citation_merkle_root,
            "content_digest": self.content_digest,
            "keywords": sorted(self.keywords),
        }


@dataclass(frozen=True)
class ManuscriptNode:
    id: bytes
    origin: bytes
    authorship: AuthorshipComponent
    confirmations: tuple[ReviewRecord, ...]
    remarks: tuple[RemarkEntry, ...]
    meta: ManuscriptMeta
    citations: tuple[bytes, ...]
    state: ManuscriptState

    @property
    def version(self) -> int:
        return self.meta.version

    def __deepcopy__(self, memo):
        return self  # immutable value

    def version_digest(self) -> bytes:
        """What authors sign: everything about this version except reviews,
        remarks and state."""
        return digest(
            {
                "origin": self.origin,
                "authorship": self.authorship.unsigned_record(),
                "meta": self.meta.record(),
                "citations": list(self.citations),
            }
        )

    def components(self) -> dict:
        return {
            "origin": self.origin,
            "authorship": {
                **self.authorship.unsigned_record(),
                "signatures": [[a, s] for a, s in self.authorship.signatures],
            },
            "confirmations": [r.record() for r in self.confirmations],
            "remarks": [r.record() for r in self.remarks],
            "meta": self.meta.record(),
            "citations": list(self.citations),
            "state": self.state.value,
        }

    def remark_pool(self) -> int:
        return sum(r.stake for r in self.remarks)

    def encoded(self) -> bytes:
        return encode({"id": self.id, **self.components()})


def canonical_hash(node: ManuscriptNode) -> bytes:
    """Content address of a node; ignores whatever is in ``node.id``."""
    try:
        return digest(node.components())
    except (TypeError, AttributeError, ValueError) as exc:
        raise errors.MalformedComponent(str(exc)) from None


def _rehash(node: ManuscriptNode) -> ManuscriptNode:
    return replace(node, id=canonical_hash(node))


def origin_for(authorship_contract: bytes) -> bytes:
    return digest({"manuscript-origin": authorship_contract})


GENESIS_ORIGIN = digest({"manuscript-origin": "genesis"})


def _check_shares(authors: tuple[tuple[bytes, Fraction], ...]) -> None:
    if not authors:
        raise errors.MalformedComponent("a manuscript needs at least one author")
    if len({a for a, _ in authors}) != len(authors):
        raise errors.MalformedComponent("duplicate author")
    if any(not isinstance(s, Fraction) or s <= 0 or s > 1 for _, s in authors):
        raise errors.SharesDontSumToOne("author shares must lie in (0, 1]")
    if sum(s for _, s in authors) != 1:
        raise errors.SharesDontSumToOne(f"shares sum to {sum(s for _, s in authors)}")


# ---------------------------------------------------------------------------
# Graph
# ---------------------------------------------------------------------------


@dataclass
class PublicationGraph:
    """All nodes keyed by origin. ``keys`` maps addresses to public keys and
    is normally the ledger's live key registry."""

    keys: Mapping[bytes, bytes]
    nodes: dict[bytes, ManuscriptNode] = field(default_factory=dict)
    _by_id: dict[bytes, bytes] = field(default_factory=dict)
    genesis: bytes | None = None

    # -- lookups -------------------------------------------------------

    def node(self, origin: bytes) -> ManuscriptNode:
        try:
            return self.nodes[origin]
        except KeyError:
            raise errors.UnknownManuscript(hexs(origin)) from None

    def by_id(self, node_id: bytes) -> ManuscriptNode:
        """Resolve any historical id to the node's current version."""
        try:
            return self.nodes[self._by_id[node_id]]
        except KeyError:
            raise errors.UnknownManuscript(hexs(node_id)) from None

    def edges(self) -> list[tuple[bytes, bytes]]:
        """(citing id, cited id) pairs, sorted."""
        return sorted((n.id, c) for n in self.nodes.values() for c in n.citations)

    def _store(self, node: ManuscriptNode) -> ManuscriptNode:
        self.nodes[node.origin] = node
        self._by_id[node.id] = node.origin
        return node

    def _open(self, origin: bytes) -> ManuscriptNode:
        node = self.node(origin)
        if node.state is not ManuscriptState.UNDER_REVIEW:
            raise errors.LockedManuscript(f"manuscript is {node.state.value}")
        return node

    # -- genesis -------------------------------------------------------

    def init_genesis(self, content_digest: bytes) -> ManuscriptNode:
        if self.genesis is not None:
            raise errors.GenesisExists("the graph already has a genesis manuscript")
        node = _rehash(
            ManuscriptNode(
                id=ZERO_HASH,
                origin=GENESIS_ORIGIN,
                authorship=AuthorshipComponent((), 0, ZERO_HASH),
                confirmations=(),
                remarks=(),
                meta=ManuscriptMeta(1, 0, merkle_root(()), content_digest),
                citations=(),
                state=ManuscriptState.CONFIRMED,
            )
        )
        self.genesis = node.origin
        return self._store(node)

    # -- submission and revision --------------------------------------

    def preview_submission(
        self,
        authors: Iterable[tuple[bytes, Fraction]],
        content_digest: bytes,
        citations: Iterable[bytes],
        authorship_contract: bytes,
        *,
        author_stake: int,
        timestamp: int,
        keywords: Iterable[str] = (),
    ) -> ManuscriptNode:
        """Unsigned version-1 node; authors sign its ``version_digest()``."""
        authors = tuple((a, Fraction(s)) for a, s in authors)
        cites = tuple(sorted(set(citations)))
        return ManuscriptNode(
            id=ZERO_HASH,
            origin=origin_for(authorship_contract),
            authorship=AuthorshipComponent(authors, author_stake, authorship_contract),
            confirmations=(),
            remarks=(),
            meta=ManuscriptMeta(
                1, timestamp, merkle_root(cites), content_digest, frozenset(k.lower() for k in keywords)
            ),
            citations=cites,
            state=ManuscriptState.UNDER_REVIEW,
        )

    def submit_manuscript(
        self,
        authors: Iterable[tuple[bytes, Fraction]],
        content_digest: bytes,
        citations: Iterable[bytes],
        authorship_contract: bytes,
        *,
        author_stake: int,
        signatures: Mapping[bytes, bytes],
        timestamp: int,
        keywords: Iterable[str] = (),
    ) -> ManuscriptNode:
        draft = self.preview_submission(
            authors,
            content_digest,
            citations,
            authorship_contract,
            author_stake=author_stake,
            timestamp=timestamp,
            keywords=keywords,
        )
        if draft.origin in self.nodes:
            raise errors.StateMismatch("this authorship contract already initiated a manuscript")
        _check_shares(draft.authorship.authors)
        self._check_citations(draft.citations)
        return self._store(_rehash(self._with_author_signatures(draft, signatures)))

    def preview_revision(
        self,
        origin: bytes,
        new_content_digest: bytes,
        *,
        timestamp: int,
        new_citations: Iterable[bytes] | None = None,
        updated_authors: Iterable[tuple[bytes, Fraction]] | None = None,
    ) -> ManuscriptNode:
        node = self._open(origin)
        cites = node.citations if new_citations is None else tuple(sorted(set(new_citations)))
        authorship = node.authorship
        if updated_authors is not None:
            authorship = replace(authorship, authors=tuple((a, Fraction(s)) for a, s in updated_authors))
        return replace(
            node,
            authorship=replace(authorship, signatures=()),
            meta=ManuscriptMeta(
                node.meta.version + 1, timestamp, merkle_root(cites), new_content_digest, node.meta.keywords
            ),
            citations=cites,
        )

    def revise_manuscript(
        self,
        origin: bytes,
        new_content_digest: bytes,
        *,
        signatures: Mapping[bytes, bytes],
        timestamp: int,
        new_citations: Iterable[bytes] | None = None,
        updated_authors: Iterable[tuple[bytes, Fraction]] | None = None,
    ) -> ManuscriptNode:
        draft = self.preview_revision(
            origin,
            new_content_digest,
            timestamp=timestamp,
            new_citations=new_citations,
            updated_authors=updated_authors,
        )
        _check_shares(draft.authorship.authors)
        reviewers = {r.reviewer for r in draft.confirmations}
        if reviewers & set(draft.authorship.addresses):
            raise errors.ReviewerIsAuthor("a reviewer of this manuscript cannot become an author")
        self._check_citations(draft.citations, citing=origin)
        return self._store(_rehash(self._with_author_signatures(draft, signatures)))

    def _with_author_signatures(self, draft: ManuscriptNode, signatures: Mapping[bytes, bytes]) -> ManuscriptNode:
        message = draft.version_digest()
        sigs = []
        for addr in sorted(draft.authorship.addresses):
            sig = signatures.get(addr)
            pub = self.keys.get(addr)
            if sig is None or pub is None or not verify_signature(pub, message, sig):
                raise errors.MissingSignature(f"author {hexs(addr)[:12]} has not signed this version")
            sigs.append((addr, sig))
        return replace(draft, authorship=replace(draft.authorship, signatures=tuple(sigs)))

    def _check_citations(self, citations: tuple[bytes, ...], citing: bytes | None = None) -> None:
        if not citations:
            raise errors.NoCitations("a manuscript must cite at least one node (genesis is always available)")
        for cid in citations:
            origin = self._by_id.get(cid)
            target = self.nodes.get(origin) if origin is not None else None
            if target is None or target.state is not ManuscriptState.CONFIRMED or target.id != cid:
                raise errors.UnconfirmedCitation(f"{hexs(cid)[:12]} is not a confirmed manuscript")
            if origin == citing:
                raise errors.UnconfirmedCitation("a manuscript cannot cite itself")

    # -- confirmations and remarks ------------------------------------

    def record_review(self, origin: bytes, record: ReviewRecord) -> ManuscriptNode:
        node = self.node(origin)
        if node.state is not ManuscriptState.UNDER_REVIEW:
            raise errors.NotUnderReview(f"manuscript is {node.state.value}")
        if record.reviewer in node.authorship.addresses:
            raise errors.ReviewerIsAuthor("authors cannot review their own manuscript")
        if record.version_signed != node.version or record.signed_digest != node.version_digest():
            raise errors.StateMismatch("review does not refer to the current version")
        pub = self.keys.get(record.reviewer)
        if pub is None or not verify_signature(pub, record.message(), record.signature):
            raise errors.BadSignature("review record signature does not verify")
        return self._store(_rehash(replace(node, confirmations=node.confirmations + (record,))))

    def attach_remark(self, origin: bytes, entry: RemarkEntry) -> ManuscriptNode:
        node = self._open(origin)
        if entry.stake <= 0:
            raise errors.ZeroStake("remark stakes must be positive")
        pub = self.keys.get(entry.agent)
        if pub is None or not verify_signature(pub, entry.message(origin), entry.signature):
            raise errors.BadSignature("remark signature does not verify")
        return self._store(_rehash(replace(node, remarks=node.remarks + (entry,))))

    # -- terminal transitions -----------------------------------------

    def confirm(self, origin: bytes) -> ManuscriptNode:
        node = self._open(origin)
        return self._store(_rehash(replace(node, state=ManuscriptState.CONFIRMED)))

    def withdraw(self, origin: bytes) -> ManuscriptNode:
        node = self._open(origin)
        return self._store(_rehash(replace(node, state=ManuscriptState.WITHDRAWN)))

    # -- verification --------------------------------------------------

    def verify(self) -> Report:
        v: list[str] = []
        for node in self.nodes.values():
            v += verify_node(node, self).violations
        v += _acyclic_violations(self.nodes.values())
        return Report(tuple(v))

    # -- export --------------------------------------------------------

    def export_nodelink(self) -> str:
        return render_nodelink(self.genesis_node_id(), self.nodes.values())

    def export_dot(self, labels: Mapping[bytes, str] | None = None) -> str:
        return render_dot(self.nodes.values(), labels or {})

    def genesis_node_id(self) -> bytes | None:
        return self.nodes[self.genesis].id if self.genesis is not None else None


def verify_node(node: ManuscriptNode, graph: PublicationGraph | None = None, keys=None) -> Report:
    """Recheck id, signatures, shares, merkle root and citation targets."""
    keys = keys if keys is not None else (graph.keys if graph is not None else {})
    tag = hexs(node.id)[:12]
    v: list[str] = []
    try:
        if canonical_hash(node) != node.id:
            v.append(f"node {tag}: id does not match its components")
    except errors.MalformedComponent as exc:
        return Report((f"node {tag}: malformed ({exc})",))
    if node.meta.version < 1:
        v.append(f"node {tag}: version must be >= 1")
    if node.meta.citation_merkle_root != merkle_root(node.citations):
        v.append(f"node {tag}: citation merkle root mismatch")
    if list(node.citations) != sorted(set(node.citations)):
        v.append(f"node {tag}: citations not a sorted set")

    if node.origin == GENESIS_ORIGIN:
        if node.citations or node.authorship.authors or node.confirmations or node.remarks:
            v.append(f"node {tag}: genesis must be empty")
        if node.state is not ManuscriptState.CONFIRMED or node.authorship.author_stake:
            v.append(f"node {tag}: genesis must be confirmed with no stake")
        return Report(tuple(v))

    if node.origin != origin_for(node.authorship.contract):
        v.append(f"node {tag}: origin does not derive from its authorship contract")
    try:
        _check_shares(node.authorship.authors)
    except (errors.SharesDontSumToOne, errors.MalformedComponent) as exc:
        v.append(f"node {tag}: {exc}")
    if node.authorship.author_stake <= 0:
        v.append(f"node {tag}: author stake must be positive")
    if not node.citations:
        v.append(f"node {tag}: no citations")

    vd = node.version_digest()
    signed = dict(node.authorship.signatures)
    if sorted(signed) != sorted(node.authorship.addresses) or len(signed) != len(node.authorship.signatures):
        v.append(f"node {tag}: author signature set does not match the author list")
    for addr in node.authorship.addresses:
        sig, pub = signed.get(addr), keys.get(addr)
        if sig is None or pub is None or not verify_signature(pub, vd, sig):
            v.append(f"node {tag}: bad author signature {hexs(addr)[:12]}")

    authors = set(node.authorship.addresses)
    for i, rec in enumerate(node.confirmations):
        pub = keys.get(rec.reviewer)
        if rec.reviewer in authors:
            v.append(f"node {tag}: review {i} by an author")
        if pub is None or not verify_signature(pub, rec.message(), rec.signature):
            v.append(f"node {tag}: bad review signature {i}")
        if rec.version_signed > node.version or rec.version_signed < 1:
            v.append(f"node {tag}: review {i} signs a future version")
        if rec.version_signed == node.version and rec.signed_digest != vd:
            v.append(f"node {tag}: review {i} signs different content than the current version")
        if rec.stake <= 0:
            v.append(f"node {tag}: review {i} has no stake")
    for i, rem in enumerate(node.remarks):
        pub = keys.get(rem.agent)
        if rem.stake <= 0:
            v.append(f"node {tag}: remark {i} has no stake")
        if pub is None or not verify_signature(pub, rem.message(node.origin), rem.signature):
            v.append(f"node {tag}: bad remark signature {i}")

    if graph is not None:
        for cid in node.citations:
            origin = graph._by_id.get(cid)
            target = graph.nodes.get(origin) if origin is not None else None
            if target is None or target.state is not ManuscriptState.CONFIRMED or target.id != cid:
                v.append(f"node {tag}: citation {hexs(cid)[:12]} is not a confirmed node")
    return Report(tuple(v))


def _acyclic_violations(nodes: Iterable[ManuscriptNode]) -> list[str]:
    sorter = graphlib.TopologicalSorter({n.id: set(n.citations) for n in nodes})
    try:
        sorter.prepare()
    except graphlib.CycleError as exc:
        return [f"citation cycle: {[hexs(x)[:12] for x in exc.args[1]]}"]
    return []


# ---------------------------------------------------------------------------
# Node-link JSON-lines and DOT exports
# ---------------------------------------------------------------------------


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def node_to_json(node: ManuscriptNode) -> dict:
    a = node.authorship
    return {
        "id": hexs(node.id),
        "origin": hexs(node.origin),
        "state": node.state.value,
        "authorship": {
            "authors": [[hexs(addr), str(share)] for addr, share in a.authors],
            "author_stake": a.author_stake,
            "contract": hexs(a.contract),
            "signatures": [[hexs(addr), hexs(sig)] for addr, sig in a.signatures],
        },
        "confirmations": [
            {
                "reviewer": hexs(r.reviewer),
                "contract": hexs(r.contract),
                "stake": r.stake,
                "report": r.report,
                "verdict": r.verdict.value,
                "version_signed": r.version_signed,
                "signed_digest": hexs(r.signed_digest),
                "signature": hexs(r.signature),
            }
            for r in node.confirmations
        ],
        "remarks": [
            {
                "agent": hexs(r.agent),
                "kind": r.kind.value,
                "contract": hexs(r.contract),
                "stake": r.stake,
                "terms_digest": hexs(r.terms_digest),
                "signature": hexs(r.signature),
            }
            for r in node.remarks
        ],
        "meta": {
            "version": node.meta.version,
            "timestamp": node.meta.timestamp,
            "citation_merkle_root": hexs(node.meta.citation_merkle_root),
            "content_digest": hexs(node.meta.content_digest),
            "keywords": sorted(node.meta.keywords),
        },
        "citations": [hexs(c) for c in node.citations],
    }


def _keys_exact(obj, keys: set[str]) -> dict:
    if not isinstance(obj, dict) or set(obj) != keys:
        raise ValueError(f"expected object with keys {sorted(keys)}")
    return obj


def _int(x) -> int:
    if type(x) is not int or x < 0:
        raise ValueError(f"expected non-negative int, got {x!r}")
    return x


def _str(x) -> str:
    if type(x) is not str:
        raise ValueError(f"expected string, got {x!r}")
    return x


def _fraction(x) -> Fraction:
    f = Fraction(_str(x))
    if str(f) != x:
        raise ValueError(f"non-canonical fraction {x!r}")
    return f


def _pairs(x) -> list:
    if not isinstance(x, list) or any(not isinstance(p, list) or len(p) != 2 for p in x):
        raise ValueError("expected list of pairs")
    return x


def node_from_json(obj) -> ManuscriptNode:
    """Strict inverse of :func:`node_to_json`; raises ValueError on any deviation."""
    obj = _keys_exact(obj, {"id", "origin", "state", "authorship", "confirmations", "remarks", "meta", "citations"})
    a = _keys_exact(obj["authorship"], {"authors", "author_stake", "contract", "signatures"})
    m = _keys_exact(obj["meta"], {"version", "timestamp", "citation_merkle_root", "content_digest", "keywords"})
    if not isinstance(obj["confirmations"], list) or not isinstance(obj["remarks"], list):
        raise ValueError("confirmations and remarks must be lists")
    if not isinstance(obj["citations"], list) or not isinstance(m["keywords"], list):
        raise ValueError("citations and keywords must be lists")
    records = []
    for r in obj["confirmations"]:
        r = _keys_exact(
            r, {"reviewer", "contract", "stake", "report", "verdict", "version_signed", "signed_digest", "signature"}
        )
        records.append(
            ReviewRecord(
                reviewer=unhex(_str(r["reviewer"]), 32),
                contract=unhex(_str(r["contract"]), 32),
                stake=_int(r["stake"]),
                report=_str(r["report"]),
                verdict=Verdict(r["verdict"]),
                version_signed=_int(r["version_signed"]),
                signed_digest=unhex(_str(r["signed_digest"]), 32),
                signature=unhex(_str(r["signature"]), 64),
            )
        )
    remarks = []
    for r in obj["remarks"]:
        r = _keys_exact(r, {"agent", "kind", "contract", "stake", "terms_digest", "signature"})
        remarks.append(
            RemarkEntry(
                agent=unhex(_str(r["agent"]), 32),
                kind=RemarkKind(r["kind"]),
                contract=unhex(_str(r["contract"]), 32),
                stake=_int(r["stake"]),
                terms_digest=unhex(_str(r["terms_digest"]), 32),
                signature=unhex(_str(r["signature"]), 64),
            )
        )
    keywords = [_str(k) for k in m["keywords"]]
    if keywords != sorted(set(keywords)) or any(k != k.lower() for k in keywords):
        raise ValueError("keywords must be a sorted lower-case set")
    return ManuscriptNode(
        id=unhex(_str(obj["id"]), 32),
        origin=unhex(_str(obj["origin"]), 32),
        authorship=AuthorshipComponent(
            authors=tuple((unhex(_str(p[0]), 32), _fraction(p[1])) for p in _pairs(a["authors"])),
            author_stake=_int(a["author_stake"]),
            contract=unhex(_str(a["contract"]), 32),
            signatures=tuple((unhex(_str(p[0]), 32), unhex(_str(p[1]), 64)) for p in _pairs(a["signatures"])),
        ),
        confirmations=tuple(records),
        remarks=tuple(remarks),
        meta=ManuscriptMeta(
            version=_int(m["version"]),
            timestamp=_int(m["timestamp"]),
            citation_merkle_root=unhex(_str(m["citation_merkle_root"]), 32),
            content_digest=unhex(_str(m["content_digest"]), 32),
            keywords=frozenset(keywords),
        ),
        citations=tuple(unhex(_str(c), 32) for c in obj["citations"]),
        state=ManuscriptState(obj["state"]),
    )


def render_nodelink(genesis_id: bytes | None, nodes: Iterable[ManuscriptNode]) -> str:
    nodes = sorted(nodes, key=lambda n: n.id)
    header = {"format": GRAPH_FORMAT, "version": 1, "directed": True, "genesis": hexs(genesis_id or ZERO_HASH)}
    lines = [_dumps(header)]
    lines += [_dumps({"node": node_to_json(n)}) for n in nodes]
    edges = sorted((n.id, c) for n in nodes for c in n.citations)
    lines += [_dumps({"link": {"source": hexs(s), "target": hexs(t)}}) for s, t in edges]
    return "\n".join(lines) + "\n"


def parse_nodelink(text: str) -> tuple[bytes, list[ManuscriptNode], list[tuple[bytes, bytes]]]:
    if not text.endswith("\n"):
        raise errors.ParseError("graph export must end with a newline")
    genesis = ZERO_HASH
    nodes: list[ManuscriptNode] = []
    links: list[tuple[bytes, bytes]] = []
    for lineno, line in enumerate(text[:-1].split("\n"), start=1):
        try:
            obj = json.loads(line)
            if _dumps(obj) != line:
                raise ValueError("line is not in canonical form")
            if lineno == 1:
                obj = _keys_exact(obj, {"format", "version", "directed", "genesis"})
                if obj["format"] != GRAPH_FORMAT or obj["version"] != 1 or obj["directed"] is not True:
                    raise ValueError("bad header")
                genesis = unhex(_str(obj["genesis"]), 32)
            elif "node" in obj and not links:
                nodes.append(node_from_json(_keys_exact(obj, {"node"})["node"]))
            elif "link" in obj:
                link = _keys_exact(_keys_exact(obj, {"link"})["link"], {"source", "target"})
                links.append((unhex(_str(link["source"]), 32), unhex(_str(link["target"]), 32)))
            else:
                raise ValueError("unrecognised record")
        except (ValueError, TypeError, KeyError) as exc:
            raise errors.ParseError(str(exc), lineno) from None
    return genesis, nodes, links


def verify_nodelink_text(text: str, keys: Mapping[bytes, bytes]) -> Report:
    """Verify a graph export against an account key registry."""
    try:
        genesis_id, nodes, links = parse_nodelink(text)
    except errors.ParseError as exc:
        return Report((f"graph parse error: {exc}",))
    graph = PublicationGraph(keys=keys)
    v: list[str] = []
    ids = [n.id for n in nodes]
    if ids != sorted(set(ids)):
        v.append("graph: node records not sorted by unique id")
    for n in nodes:
        if n.origin in graph.nodes:
            v.append(f"graph: duplicate origin {hexs(n.origin)[:12]}")
        graph._store(n)
        if n.origin == GENESIS_ORIGIN:
            graph.genesis = n.origin
    if graph.genesis is None or graph.genesis_node_id() != genesis_id:
        v.append("graph: genesis header does not match the genesis node")
    if links != graph.edges():
        v.append("graph: link records do not match node citations")
    return Report(tuple(v) + graph.verify().violations)


def render_dot(nodes: Iterable[ManuscriptNode], labels: Mapping[bytes, str]) -> str:
    nodes = sorted(nodes, key=lambda n: n.id)
    lines = ["digraph publication {"]
    for n in nodes:
        name = labels.get(n.origin, "genesis" if n.origin == GENESIS_ORIGIN else hexs(n.id)[:12])
        name = name.replace('\\', '\\\\').replace('"', '\\"')
        lines.append(f'  "{hexs(n.id)}" [label="{name} v{n.version} {n.state.value}"];')
    for n in nodes:
        for c in n.citations:
            lines.append(f'  "{hexs(n.id)}" -> "{hexs(c)}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
