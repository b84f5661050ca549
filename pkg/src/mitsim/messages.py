"""Warning messages and their canonical wire encoding.

A warning is the data package pushed to edge devices when a disturbance is
detected: disturbance kind, located affected entries (network, segment,
segment class, modes), severity measures, estimated end time, a revision
counter, and a detail tier.  The ``basic`` tier is small enough to spread
broadly; the ``full`` tier adds case-specific details and is handed out on
request only.

Wire format
-----------
One warning encodes to one line of UTF-8 text: a strict JSON subset with
keys in a fixed order and no insignificant whitespace, so equal warnings
encode to identical bytes in any implementation.

* top-level keys, in order: ``warning_id``, ``event_id``, ``kind``,
  ``revision``, ``detail``, ``issue_time``, ``estimated_end``,
  ``severity``, ``affected``, ``case_specific``;
* ``severity`` keys, in order, present measures only:
  ``capacity_reduction``, ``lanes_affected``, ``severity_index``,
  ``displaced_volume``;
* each ``affected`` entry: ``network_id``, ``segment_id``, ``class``,
  ``modes`` (modes sorted);
* ``case_specific`` keys sorted lexicographically, scalar values only;
* integers in decimal; times as integer seconds since scenario epoch;
  fractional numbers with exactly 4 decimal digits (e.g. ``0.2500``);
* strings JSON-escaped (``\\``, ``"``, control characters).

The decoder is strict: it accepts exactly this canonical form and reports
the character offset of the first violation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Union

from .disturbance import DISTURBANCE_KINDS, DisturbanceEvent, EffectMatrix, SeverityMeasure, affected_pairs
from .errors import CodecError, ValidationError
from .network import SEGMENT_CLASSES, MultiLayerNetwork

DETAIL_TIERS = ("basic", "full")

CaseValue = Union[str, int, bool, float]


def quantize_fraction(x: float) -> float:
    """Round to the 4 decimal digits the wire format can carry."""
    return round(float(x), 4)


def _is_quantized(x: float) -> bool:
    return float(f"{x:.4f}") == x


@dataclass(frozen=True)
class AffectedEntry:
    network_id: str
    segment_id: str
    seg_class: str
    modes: tuple[str, ...]


@dataclass(frozen=True)
class WarningMessage:
    warning_id: str
    event_id: str
    kind: str
    revision: int
    detail: str
    issue_time: int
    estimated_end: int
    severity: SeverityMeasure
    affected: tuple[AffectedEntry, ...]
    case_specific: Mapping[str, CaseValue] = field(default_factory=dict)

    def validate(self) -> None:
        if self.kind not in DISTURBANCE_KINDS:
            raise ValidationError(f"warning {self.warning_id}: unknown kind {self.kind!r}")
        if self.revision < 0:
            raise ValidationError(f"warning {self.warning_id}: negative revision")
        if self.detail not in DETAIL_TIERS:
            raise ValidationError(f"warning {self.warning_id}: bad detail tier {self.detail!r}")
        if self.estimated_end <= self.issue_time:
            raise ValidationError(
                f"warning {self.warning_id}: estimated_end must exceed issue_time"
            )
        if not self.affected:
            raise ValidationError(f"warning {self.warning_id}: empty affected list")
        for entry in self.affected:
            if entry.seg_class not in SEGMENT_CLASSES:
                raise ValidationError(
                    f"warning {self.warning_id}: unknown segment class {entry.seg_class!r}"
                )
            if not entry.modes:
                raise ValidationError(
                    f"warning {self.warning_id}: entry {entry.segment_id} has no modes"
                )
            if list(entry.modes) != sorted(entry.modes):
                raise ValidationError(
                    f"warning {self.warning_id}: modes of {entry.segment_id} not sorted"
                )
        if self.detail == "basic" and self.case_specific:
            raise ValidationError(
                f"warning {self.warning_id}: basic tier must not carry case data"
            )

    def active(self, now: float) -> bool:
        return now < self.estimated_end


# -- construction ------------------------------------------------------------


def make_warning(
    event: DisturbanceEvent,
    net: MultiLayerNetwork,
    matrix: EffectMatrix,
    issue_time: int,
) -> tuple[WarningMessage, Optional[WarningMessage]]:
    """Build revision 0 of an event's warning: (basic tier, full tier).

    Affected entries cover each located segment with the modes the effect
    matrix marks as hit there (reserved lanes stay out unless the event
    flags them).  For kinds with an empty matrix row (major events) every
    mode present on the located segments is listed, since the impact is a
    demand shift for everyone nearby.  The full tier is None when the event
    carries no case-specific data.
    """
    pairs = affected_pairs(event.kind, matrix)
    reserved_hit = bool(event.specifics.get("reserved_lane_hit", False))
    estimated_end = _ceil_int(event.start + event.estimated_duration)
    if estimated_end <= issue_time:
        raise ValidationError(
            f"event {event.event_id}: already past its estimated end at issue time"
        )
    entries = []
    for seg_id in sorted(set(event.segments)):
        seg = net.segments.get(seg_id)
        if seg is None:
            raise ValidationError(f"event {event.event_id}: unknown segment {seg_id}")
        if pairs:
            modes = sorted(
                entry.mode_id for entry in seg.usage
                if (entry.mode_id, seg.network_id) in pairs
                and (reserved_hit or not entry.reserved)
            )
        else:
            modes = sorted(entry.mode_id for entry in seg.usage)
        if not modes:
            continue
        entries.append(AffectedEntry(
            network_id=seg.network_id,
            segment_id=seg_id,
            seg_class=seg.seg_class,
            modes=tuple(modes),
        ))
    if not entries:
        raise ValidationError(
            f"event {event.event_id}: no affected modes on the located segments"
        )
    severity = _quantize_severity(event.severity)
    basic = WarningMessage(
        warning_id=f"w-{event.event_id}",
        event_id=event.event_id,
        kind=event.kind,
        revision=0,
        detail="basic",
        issue_time=int(issue_time),
        estimated_end=estimated_end,
        severity=severity,
        affected=tuple(entries),
        case_specific={},
    )
    basic.validate()
    case = _coerce_case_map(event.specifics)
    if not case:
        return basic, None
    full = replace(basic, detail="full", case_specific=case)
    full.validate()
    return basic, full


def revise(
    w: WarningMessage,
    new_estimated_end: int,
    new_severity: Optional[SeverityMeasure] = None,
) -> WarningMessage:
    """Next revision of a warning; unspecified fields carry over."""
    out = replace(
        w,
        revision=w.revision + 1,
        estimated_end=int(new_estimated_end),
        severity=_quantize_severity(new_severity) if new_severity is not None else w.severity,
    )
    out.validate()
    return out


def _ceil_int(x: float) -> int:
    import math

    return int(math.ceil(x))


def _quantize_severity(severity: SeverityMeasure) -> SeverityMeasure:
    return SeverityMeasure(
        capacity_reduction=(None if severity.capacity_reduction is None
                            else quantize_fraction(severity.capacity_reduction)),
        lanes_affected=severity.lanes_affected,
        severity_index=severity.severity_index,
        displaced_volume=(None if severity.displaced_volume is None
                          else quantize_fraction(severity.displaced_volume)),
    )


def _coerce_case_map(specifics: Mapping[str, object]) -> dict[str, CaseValue]:
    out: dict[str, CaseValue] = {}
    for key in sorted(specifics):
        value = specifics[key]
        if isinstance(value, bool) or isinstance(value, (int, str)):
            out[str(key)] = value
        elif isinstance(value, float):
            out[str(key)] = quantize_fraction(value)
        else:
            out[str(key)] = str(value)
    return out


# -- canonical encoder -------------------------------------------------------

_ESCAPES = {'"': '\\"', "\\": "\\\\", "\b": "\\b", "\f": "\\f",
            "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def _emit_string(value: str, out: list[str]) -> None:
    out.append('"')
    for ch in value:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')


def _emit_fraction(value: float, out: list[str], what: str) -> None:
    if not _is_quantized(value):
        raise ValidationError(f"{what}: value {value!r} not quantized to 4 decimals")
    out.append(f"{value:.4f}")


def _emit_case_value(value: CaseValue, out: list[str], key: str) -> None:
    if isinstance(value, bool):
        out.append("true" if value else "false")
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        _emit_fraction(value, out, f"case_specific {key}")
    elif isinstance(value, str):
        _emit_string(value, out)
    else:
        raise ValidationError(f"case_specific {key}: unsupported value type")


def encode(w: WarningMessage) -> bytes:
    """Canonical byte encoding; equal warnings yield identical bytes."""
    w.validate()
    out: list[str] = ["{"]

    def key(name: str, first: bool = False) -> None:
        if not first:
            out.append(",")
        out.append(f'"{name}":')

    key("warning_id", first=True)
    _emit_string(w.warning_id, out)
    key("event_id")
    _emit_string(w.event_id, out)
    key("kind")
    _emit_string(w.kind, out)
    key("revision")
    out.append(str(w.revision))
    key("detail")
    _emit_string(w.detail, out)
    key("issue_time")
    out.append(str(w.issue_time))
    key("estimated_end")
    out.append(str(w.estimated_end))
    key("severity")
    out.append("{")
    first = True
    sev = w.severity
    if sev.capacity_reduction is not None:
        out.append('"capacity_reduction":')
        _emit_fraction(sev.capacity_reduction, out, "capacity_reduction")
        first = False
    if sev.lanes_affected is not None:
        if not first:
            out.append(",")
        out.append(f'"lanes_affected":{sev.lanes_affected}')
        first = False
    if sev.severity_index is not None:
        if not first:
            out.append(",")
        out.append(f'"severity_index":{sev.severity_index}')
        first = False
    if sev.displaced_volume is not None:
        if not first:
            out.append(",")
        out.append('"displaced_volume":')
        _emit_fraction(sev.displaced_volume, out, "displaced_volume")
        first = False
    out.append("}")
    key("affected")
    out.append("[")
    for i, entry in enumerate(w.affected):
        if i:
            out.append(",")
        out.append('{"network_id":')
        _emit_string(entry.network_id, out)
        out.append(',"segment_id":')
        _emit_string(entry.segment_id, out)
        out.append(',"class":')
        _emit_string(entry.seg_class, out)
        out.append(',"modes":[')
        for j, mode in enumerate(entry.modes):
            if j:
                out.append(",")
            _emit_string(mode, out)
        out.append("]}")
    out.append("]")
    key("case_specific")
    out.append("{")
    for i, ck in enumerate(sorted(w.case_specific)):
        if i:
            out.append(",")
        _emit_string(ck, out)
        out.append(":")
        _emit_case_value(w.case_specific[ck], out, ck)
    out.append("}")
    out.append("}")
    return "".join(out).encode("utf-8")


# -- canonical decoder -------------------------------------------------------


class _Scanner:
    """Strict scanner for the canonical form, tracking character offsets."""

    def __init__(self, text: str):
        self.text = text
        self.i = 0

    def fail(self, message: str, at: Optional[int] = None):
        raise CodecError(message, self.i if at is None else at)

    def peek(self) -> str:
        if self.i >= len(self.text):
            self.fail("unexpected end of input")
        return self.text[self.i]

    def expect(self, literal: str) -> None:
        end = self.i + len(literal)
        if end > len(self.text):
            self.fail("unexpected end of input")
        if self.text[self.i:end] != literal:
            self.fail(f"expected {literal!r}")
        self.i = end

    def parse_string(self) -> str:
        self.expect('"')
        chars: list[str] = []
        while True:
            if self.i >= len(self.text):
                self.fail("unexpected end of input in string")
            ch = self.text[self.i]
            if ch == '"':
                self.i += 1
                return "".join(chars)
            if ch == "\\":
                self.i += 1
                if self.i >= len(self.text):
                    self.fail("unexpected end of input in escape")
                esc = self.text[self.i]
                if esc in '"\\':
                    chars.append(esc)
                elif esc in "bfnrt":
                    chars.append({"b": "\b", "f": "\f", "n": "\n",
                                  "r": "\r", "t": "\t"}[esc])
                elif esc == "u":
                    hexpart = self.text[self.i + 1:self.i + 5]
                    if len(hexpart) < 4:
                        self.fail("unexpected end of input in unicode escape")
                    try:
                        chars.append(chr(int(hexpart, 16)))
                    except ValueError:
                        self.fail("bad unicode escape")
                    self.i += 4
                else:
                    self.fail(f"bad escape character {esc!r}")
                self.i += 1
            elif ord(ch) < 0x20:
                self.fail("raw control character in string")
            else:
                chars.append(ch)
                self.i += 1

    def parse_number(self) -> Union[int, float]:
        start = self.i
        if self.peek() == "-":
            self.i += 1
        digits = 0
        while self.i < len(self.text) and self.text[self.i].isdigit():
            self.i += 1
            digits += 1
        if digits == 0:
            self.fail("expected a number", at=start)
        if self.i < len(self.text) and self.text[self.i] == ".":
            self.i += 1
            frac = 0
            while self.i < len(self.text) and self.text[self.i].isdigit():
                self.i += 1
                frac += 1
            if frac != 4:
                self.fail("fractional values carry exactly 4 decimals", at=start)
            return float(self.text[start:self.i])
        return int(self.text[start:self.i])

    def parse_int(self, what: str) -> int:
        at = self.i
        value = self.parse_number()
        if not isinstance(value, int):
            self.fail(f"{what} must be an integer", at=at)
        return value

    def parse_key(self, name: str, first: bool = False) -> None:
        if not first:
            self.expect(",")
        self.expect(f'"{name}":')


def decode(data: bytes) -> WarningMessage:
    """Decode one canonical warning; raises :class:`CodecError` on violation."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CodecError("invalid UTF-8", exc.start) from None
    s = _Scanner(text)
    s.expect("{")
    s.parse_key("warning_id", first=True)
    warning_id = s.parse_string()
    s.parse_key("event_id")
    event_id = s.parse_string()
    s.parse_key("kind")
    kind_at = s.i
    kind = s.parse_string()
    if kind not in DISTURBANCE_KINDS:
        s.fail(f"unknown kind code {kind!r}", at=kind_at)
    s.parse_key("revision")
    revision_at = s.i
    revision = s.parse_int("revision")
    if revision < 0:
        s.fail("revision must be >= 0", at=revision_at)
    s.parse_key("detail")
    detail_at = s.i
    detail = s.parse_string()
    if detail not in DETAIL_TIERS:
        s.fail(f"unknown detail tier {detail!r}", at=detail_at)
    s.parse_key("issue_time")
    issue_time = s.parse_int("issue_time")
    s.parse_key("estimated_end")
    end_at = s.i
    estimated_end = s.parse_int("estimated_end")
    if estimated_end <= issue_time:
        s.fail("estimated_end must exceed issue_time", at=end_at)
    s.parse_key("severity")
    severity = _parse_severity(s)
    s.parse_key("affected")
    affected = _parse_affected(s)
    s.parse_key("case_specific")
    case = _parse_case_map(s, detail)
    s.expect("}")
    if s.i != len(text):
        s.fail("trailing data after message")
    return WarningMessage(
        warning_id=warning_id,
        event_id=event_id,
        kind=kind,
        revision=revision,
        detail=detail,
        issue_time=issue_time,
        estimated_end=estimated_end,
        severity=severity,
        affected=affected,
        case_specific=case,
    )


def _parse_severity(s: _Scanner) -> SeverityMeasure:
    obj_at = s.i
    s.expect("{")
    fields: dict[str, object] = {}
    first = True
    for name, kind in (("capacity_reduction", "fraction"),
                       ("lanes_affected", "int"),
                       ("severity_index", "int"),
                       ("displaced_volume", "fraction")):
        mark = s.i
        try:
            s.parse_key(name, first=first)
        except CodecError:
            s.i = mark
            continue
        value_at = s.i
        value = s.parse_number()
        if kind == "int" and not isinstance(value, int):
            s.fail(f"{name} must be an integer", at=value_at)
        if kind == "fraction" and isinstance(value, int):
            s.fail(f"{name} carries exactly 4 decimals", at=value_at)
        fields[name] = value
        first = False
    s.expect("}")
    if not fields:
        s.fail("severity must carry at least one measure", at=obj_at)
    try:
        return SeverityMeasure(**fields)  # type: ignore[arg-type]
    except ValidationError as exc:
        s.fail(str(exc), at=obj_at)


def _parse_affected(s: _Scanner) -> tuple[AffectedEntry, ...]:
    list_at = s.i
    s.expect("[")
    entries: list[AffectedEntry] = []
    if s.peek() == "]":
        s.fail("affected list must not be empty", at=list_at)
    while True:
        s.expect('{"network_id":')
        network_id = s.parse_string()
        s.expect(',"segment_id":')
        segment_id = s.parse_string()
        s.expect(',"class":')
        class_at = s.i
        seg_class = s.parse_string()
        if seg_class not in SEGMENT_CLASSES:
            s.fail(f"unknown segment class {seg_class!r}", at=class_at)
        s.expect(',"modes":[')
        modes_at = s.i
        modes: list[str] = []
        if s.peek() == "]":
            s.fail("modes list must not be empty", at=modes_at)
        while True:
            modes.append(s.parse_string())
            if s.peek() == ",":
                s.i += 1
                continue
            break
        if modes != sorted(modes):
            s.fail("modes must be sorted", at=modes_at)
        s.expect("]}")
        entries.append(AffectedEntry(network_id, segment_id, seg_class, tuple(modes)))
        if s.peek() == ",":
            s.i += 1
            continue
        break
    s.expect("]")
    return tuple(entries)


def _parse_case_map(s: _Scanner, detail: str) -> dict[str, CaseValue]:
    obj_at = s.i
    s.expect("{")
    out: dict[str, CaseValue] = {}
    if s.peek() == "}":
        s.i += 1
        return out
    if detail == "basic":
        s.fail("basic tier must carry an empty case_specific map", at=obj_at)
    prev_key: Optional[str] = None
    while True:
        key_at = s.i
        key = s.parse_string()
        if prev_key is not None and key <= prev_key:
            s.fail("case_specific keys must be strictly ascending", at=key_at)
        prev_key = key
        s.expect(":")
        ch = s.peek()
        if ch == '"':
            out[key] = s.parse_string()
        elif ch == "t":
            s.expect("true")
            out[key] = True
        elif ch == "f":
            s.expect("false")
            out[key] = False
        else:
            out[key] = s.parse_number()
        if s.peek() == ",":
            s.i += 1
            continue
        break
    s.expect("}")
    return out


# -- warning store and the two-tier detail flow ------------------------------


@dataclass(frozen=True)
class DetailResponse:
    """Envelope for a detail request; ``available`` is False when only the
    basic tier exists and the basic form is echoed back."""

    warning: WarningMessage
    available: bool


class WarningStore:
    """Single-writer registry of the latest revision per warning id."""

    def __init__(self):
        self._latest: dict[str, tuple[WarningMessage, Optional[WarningMessage]]] = {}

    def add(self, basic: WarningMessage, full: Optional[WarningMessage]) -> None:
        basic.validate()
        if full is not None:
            full.validate()
        current = self._latest.get(basic.warning_id)
        if current is not None and basic.revision <= current[0].revision:
            raise ValidationError(
                f"warning {basic.warning_id}: stale revision {basic.revision}"
            )
        self._latest[basic.warning_id] = (basic, full)

    def latest(self, warning_id: str) -> tuple[WarningMessage, Optional[WarningMessage]]:
        if warning_id not in self._latest:
            raise ValidationError(f"unknown warning {warning_id}")
        return self._latest[warning_id]

    def revise(
        self,
        warning_id: str,
        new_estimated_end: int,
        new_severity: Optional[SeverityMeasure] = None,
    ) -> tuple[WarningMessage, Optional[WarningMessage]]:
        basic, full = self.latest(warning_id)
        new_basic = revise(basic, new_estimated_end, new_severity)
        new_full = revise(full, new_estimated_end, new_severity) if full is not None else None
        self._latest[warning_id] = (new_basic, new_full)
        return new_basic, new_full

    def warning_ids(self) -> list[str]:
        return sorted(self._latest)


def request_detail(basic: WarningMessage, store: WarningStore) -> DetailResponse:
    """Resolve a basic-tier warning to its full form, if one exists.

    Returns the full tier at the same or newer revision; when no full form
    was ever produced, the latest basic form is echoed with
    ``available=False``.
    """
    if basic.detail != "basic":
        raise ValidationError(f"warning {basic.warning_id}: detail request needs a basic tier")
    latest_basic, latest_full = store.latest(basic.warning_id)
    if latest_full is None:
        return DetailResponse(warning=latest_basic, available=False)
    return DetailResponse(warning=latest_full, available=True)
