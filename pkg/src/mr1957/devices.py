"""Paper-tape media, the character code, and the four Table-style devices.

Tape is 5-track: a frame is a 5-bit value.  Words are packed most
significant frame first, 3+5+5+5 (the first frame carries the word's
top three bits in its low bits), so four frames hold one 18-bit word
and encode/decode are exact inverses.  Tape image files start with the
magic bytes MRT1 followed by one byte per frame, low five bits
significant.

The character code is an invented Baudot-style two-state table (the
true Olivetti code is not documented): the figures state carries
digits and punctuation, the letters state A..Z, and code 31 toggles
between them.  Device speeds are configurable; the defaults are
plausibility choices, not recovered values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

FRAME_BITS = 5
FRAME_MASK = (1 << FRAME_BITS) - 1
FRAMES_PER_WORD = 4
TAPE_MAGIC = b"MRT1"

WORD_MASK = (1 << 18) - 1


class TapeError(ValueError):
    """Malformed tape image or frame stream."""


class DeviceError(ValueError):
    """Channel misuse: unassigned channel, wrong direction, exhausted tape."""


@dataclass(frozen=True)
class TapeImage:
    """An ordered run of 5-bit frames plus a provenance note."""

    frames: tuple[int, ...]
    note: str = "imported"  # assembled | punched | imported

    def __post_init__(self):
        for i, frame in enumerate(self.frames):
            if not 0 <= frame <= FRAME_MASK:
                raise TapeError(f"frame {i} out of range: {frame}")

    def __len__(self):
        return len(self.frames)


def encode_tape(words, note: str = "assembled") -> TapeImage:
    """Pack 18-bit words into frames, most significant frame first."""
    frames = []
    for w in words:
        w &= WORD_MASK
        frames.append((w >> 15) & 0b111)
        frames.append((w >> 10) & FRAME_MASK)
        frames.append((w >> 5) & FRAME_MASK)
        frames.append(w & FRAME_MASK)
    return TapeImage(tuple(frames), note)


def decode_tape(image: TapeImage) -> list[int]:
    """Unpack frames back into words; frame count must be a multiple of 4."""
    frames = image.frames
    if len(frames) % FRAMES_PER_WORD:
        raise TapeError(
            f"ragged tape: {len(frames)} frames is not a multiple of "
            f"{FRAMES_PER_WORD} (stops at frame {len(frames) - len(frames) % FRAMES_PER_WORD})"
        )
    words = []
    for i in range(0, len(frames), FRAMES_PER_WORD):
        f0, f1, f2, f3 = frames[i : i + FRAMES_PER_WORD]
        if f0 > 0b111:
            raise TapeError(
                f"frame {i}: leading frame of a word uses only 3 bits, got {f0:#o}"
            )
        words.append((f0 << 15) | (f1 << 10) | (f2 << 5) | f3)
    return words


def tape_to_bytes(image: TapeImage) -> bytes:
    return TAPE_MAGIC + bytes(image.frames)


def tape_from_bytes(data: bytes, note: str = "imported") -> TapeImage:
    if data[: len(TAPE_MAGIC)] != TAPE_MAGIC:
        raise TapeError("not a tape image: missing MRT1 magic")
    return TapeImage(
        tuple(b & FRAME_MASK for b in data[len(TAPE_MAGIC) :]), note
    )


# ---------------------------------------------------------------------------
# Character code
# ---------------------------------------------------------------------------

SHIFT_CODE = 31

_FIGS = {i + 1: ch for i, ch in enumerate("0123456789-. ")}
_FIGS[14] = "\r"
_FIGS[15] = "\n"
_LTRS = {i + 1: ch for i, ch in enumerate("ABCDEFGHIJKLMNOPQRSTUVWXYZ")}
_LTRS[27] = " "
_LTRS[28] = "\r"
_LTRS[29] = "\n"

_TO_FIGS = {ch: code for code, ch in _FIGS.items()}
_TO_LTRS = {ch: code for code, ch in _LTRS.items()}

REPERTOIRE = sorted(set(_TO_FIGS) | set(_TO_LTRS))


class CodecError(ValueError):
    """Character or frame outside the documented code table."""


class TextCodec:
    """Stateful two-shift codec between characters and 5-bit frames.

    Starts in the figures state.  encode() may emit a shift frame
    before the character's own frame; decode() consumes shift frames
    silently and returns ''.
    """

    def __init__(self):
        self.figures = True

    def encode(self, ch: str) -> list[int]:
        # characters present in both states never force a shift
        if self.figures and ch in _TO_FIGS:
            return [_TO_FIGS[ch]]
        if not self.figures and ch in _TO_LTRS:
            return [_TO_LTRS[ch]]
        if ch in _TO_FIGS:
            self.figures = True
            return [SHIFT_CODE, _TO_FIGS[ch]]
        if ch in _TO_LTRS:
            self.figures = False
            return [SHIFT_CODE, _TO_LTRS[ch]]
        raise CodecError(f"character {ch!r} is outside the code table")

    def decode(self, frame: int) -> str:
        if not 0 <= frame <= FRAME_MASK:
            raise CodecError(f"frame out of range: {frame}")
        if frame == SHIFT_CODE:
            self.figures = not self.figures
            return ""
        table = _FIGS if self.figures else _LTRS
        if frame not in table:
            state = "figures" if self.figures else "letters"
            raise CodecError(f"frame {frame:#o} undefined in {state} state")
        return table[frame]


def encode_text(text: str) -> list[int]:
    codec = TextCodec()
    frames = []
    for ch in text:
        frames.extend(codec.encode(ch))
    return frames


def frames_to_text(frames) -> str:
    codec = TextCodec()
    return "".join(codec.decode(f) for f in frames)


# ---------------------------------------------------------------------------
# Channels
# ---------------------------------------------------------------------------

KIND_PRINT = "teletype_print"
KIND_PRINT_PUNCH = "teletype_print_punch"
KIND_READER = "tape_reader"
KIND_FAST_READER = "fast_tape_reader"

READER_KINDS = (KIND_READER, KIND_FAST_READER)


@dataclass
class DeviceChannel:
    """One addressable channel: a device duty at a configurable rate.

    Readers hold a mounted tape and a position; output channels
    accumulate the frames sent to them (a printer's frames decode to
    text, the puncher's frames form a new tape).
    """

    channel: int
    kind: str
    name: str
    rate: int  # characters (frames) per second
    duty: str  # read | print | punch
    tape: TapeImage | None = None
    position: int = 0
    output: list[int] = field(default_factory=list)

    @property
    def frame_us(self) -> int:
        return round(1_000_000 / self.rate)

    def mount(self, tape: TapeImage):
        if self.duty != "read":
            raise DeviceError(f"channel {self.channel} ({self.name}) is not a reader")
        self.tape = tape
        self.position = 0

    def read_frame(self) -> int:
        if self.tape is None:
            raise DeviceError(f"channel {self.channel}: no tape mounted")
        if self.position >= len(self.tape.frames):
            raise DeviceError(f"channel {self.channel}: end of tape")
        frame = self.tape.frames[self.position]
        self.position += 1
        return frame

    def write_frame(self, frame: int):
        self.output.append(frame & FRAME_MASK)

    def text(self) -> str:
        return frames_to_text(self.output)

    def punched_tape(self) -> TapeImage:
        return TapeImage(tuple(self.output), "punched")

    def summary(self) -> dict:
        info = {
            "channel": self.channel,
            "kind": self.kind,
            "name": self.name,
            "rate": self.rate,
            "duty": self.duty,
        }
        if self.duty == "read":
            if self.tape is None:
                info["tape"] = None
            else:
                info["tape"] = {
                    "frames": len(self.tape.frames),
                    "position": self.position,
                    "note": self.tape.note,
                }
        else:
            info["frames_out"] = len(self.output)
        return info


CHANNEL_COUNT = 8

# Default rates are plausibility choices, pinned explicitly by every
# test whose expected timing depends on them.
DEFAULT_RATES = {"teletype": 10, "reader": 20, "fast_reader": 200}


class DeviceRoster:
    """The machine's channel table (instruction modifier = channel id)."""

    def __init__(self, channels):
        self.channels: dict[int, DeviceChannel] = {}
        for ch in channels:
            if not 0 <= ch.channel < CHANNEL_COUNT:
                raise DeviceError(f"channel id out of range: {ch.channel}")
            if ch.channel in self.channels:
                raise DeviceError(f"channel {ch.channel} assigned twice")
            self.channels[ch.channel] = ch

    @classmethod
    def default(cls) -> "DeviceRoster":
        """The 1957 installation: one printing teletype, one teletype
        with tape puncher (print and punch duties on separate
        channels), the mechanical reader, and the fast reader."""
        t = DEFAULT_RATES["teletype"]
        return cls(
            [
                DeviceChannel(0, KIND_PRINT, "Olivetti T2CN", t, "print"),
                DeviceChannel(1, KIND_PRINT_PUNCH, "Olivetti T2CN-PF", t, "print"),
                DeviceChannel(2, KIND_PRINT_PUNCH, "Olivetti T2CN-PF", t, "punch"),
                DeviceChannel(
                    3, KIND_READER, "Olivetti T2TA10", DEFAULT_RATES["reader"], "read"
                ),
                DeviceChannel(
                    4,
                    KIND_FAST_READER,
                    "Ferranti TR5",
                    DEFAULT_RATES["fast_reader"],
                    "read",
                ),
            ]
        )

    def get(self, channel: int) -> DeviceChannel:
        dev = self.channels.get(channel)
        if dev is None:
            raise DeviceError(f"channel {channel} is unassigned")
        return dev

    def transfer(self, channel: int, direction: str, frame: int | None = None):
        """Move one frame; returns (frame, elapsed_us).  Blocking model:
        the caller charges elapsed_us to the machine clock."""
        dev = self.get(channel)
        if direction == "read":
            if dev.duty != "read":
                raise DeviceError(
                    f"channel {channel} ({dev.name}) cannot be read from"
                )
            return dev.read_frame(), dev.frame_us
        if direction == "write":
            if dev.duty == "read":
                raise DeviceError(f"channel {channel} ({dev.name}) is a reader")
            dev.write_frame(frame)
            return frame & FRAME_MASK, dev.frame_us
        raise DeviceError(f"bad direction {direction!r}")

    def summary(self) -> list[dict]:
        return [self.channels[c].summary() for c in sorted(self.channels)]
