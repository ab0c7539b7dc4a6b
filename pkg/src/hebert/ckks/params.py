"""CKKS scheme parameters and the shipped presets."""

import hashlib
import os
from dataclasses import dataclass, field

from ..errors import CryptoError
from ..ring import RingParams


@dataclass(frozen=True)
class CkksParams:
    """Scheme parameters: ring, default scale, level budget, slot count.

    secret_hamming_weight None means dense uniform ternary; a positive value
    selects a sparse ternary secret (required for practical bootstrapping).
    dnum is the hybrid key-switching digit count at the top level.
    """

    ring: RingParams
    default_scale: float
    security_preset_name: str
    dnum: int = 3
    secret_hamming_weight: int = None
    error_sigma: float = 3.2
    _hash: list = field(default_factory=list, compare=False, repr=False)

    @property
    def max_level(self):
        return self.ring.max_level

    @property
    def slot_count(self):
        return self.ring.ring_degree // 2

    @property
    def ring_degree(self):
        return self.ring.ring_degree

    def __post_init__(self):
        if self.default_scale <= 0:
            raise CryptoError("default_scale must be positive")
        if self.dnum < 1:
            raise CryptoError("dnum must be >= 1")
        if self.dnum > 1 and not self.ring.special_moduli:
            raise CryptoError("key switching needs special moduli")

    @property
    def digit_size(self):
        """Chain limbs per key-switching digit."""
        return -(-(self.max_level + 1) // self.dnum)

    def digit_groups(self, level):
        """Active-limb index groups for hybrid KS at the given level."""
        idx = list(range(level + 1))
        sz = self.digit_size
        return [idx[i : i + sz] for i in range(0, len(idx), sz)]

    def to_config_text(self):
        lines = [
            "hebert-preset v1",
            f"scale {self.default_scale.hex()}",
            f"security {self.security_preset_name}",
            f"dnum {self.dnum}",
            f"secret_hamming_weight {self.secret_hamming_weight or 0}",
            f"error_sigma {float(self.error_sigma).hex()}",
        ]
        return "\n".join(lines) + "\n" + self.ring.to_config_text()

    @classmethod
    def from_config_text(cls, text):
        lines = text.strip().splitlines()
        if not lines or lines[0].strip() != "hebert-preset v1":
            raise CryptoError("unrecognized preset header")
        split = next(i for i, ln in enumerate(lines) if ln.startswith("hebert-ring-config"))
        fields_ = {}
        for ln in lines[1:split]:
            key, _, rest = ln.partition(" ")
            fields_[key] = rest.strip()
        hw = int(fields_["secret_hamming_weight"])
        return cls(
            ring=RingParams.from_config_text("\n".join(lines[split:])),
            default_scale=float.fromhex(fields_["scale"]),
            security_preset_name=fields_["security"],
            dnum=int(fields_["dnum"]),
            secret_hamming_weight=hw or None,
            error_sigma=float.fromhex(fields_["error_sigma"]),
        )

    def params_hash(self):
        """32-byte digest binding serialized objects to their parameters."""
        if not self._hash:
            self._hash.append(
                hashlib.sha256(self.to_config_text().encode()).digest()
            )
        return self._hash[0]


def _hex_tuple(*xs):
    return tuple(int(x, 16) for x in xs)


# Chains are pre-generated (searching downward from 2^k for primes ≡ 1 mod 2N)
# so presets are reproducible files rather than runtime searches.

_PAPER_CHAIN = _hex_tuple(
    "0xffffffffffc0001", "0xffffffff00001", "0x7ffffff9c0001", "0x7ffffff900001",
    "0x7ffffff240001", "0x7ffffff080001", "0x7fffffeac0001", "0x7fffffe900001",
    "0x7fffffe780001", "0x7fffffe0c0001", "0x7fffffddc0001", "0x7fffffdc40001",
    "0x7fffffdb00001", "0x7fffffd880001", "0x7fffffd280001", "0x7fffffcfc0001",
    "0x7fffffca80001", "0x7fffffc9c0001", "0x7fffffc900001", "0x7fffffbb80001",
    "0x7fffffad00001", "0x7fffffac80001", "0x7fffffa380001", "0x7fffffa1c0001",
    "0x7fffff9d40001", "0x7fffff9c00001", "0x7fffff9000001", "0x7fffff84c0001",
    "0x7fffff8280001", "0x7fffff7f80001",
)
_PAPER_SPECIAL = _hex_tuple(
    "0x1fffffffffe00001", "0x1fffffffffc80001", "0x1fffffffffb40001",
    "0x1fffffffff500001",
)

_DESK_CHAIN = _hex_tuple(
    "0xfffffffffffc001", "0xfffffdc001", "0xfffff4c001", "0xfffff3c001",
    "0xffffe80001", "0xffffe74001", "0xffffd6c001", "0xffffd44001",
    "0xffffd0c001",
)
_DESK_SPECIAL = _hex_tuple(
    "0xffffffffffe8001", "0xffffffffffd8001", "0xffffffffffc4001",
)

_BOOT_CHAIN = _hex_tuple(
    "0x3ffffffffc001", "0xfffffdc001", "0xfffff4c001", "0xfffff3c001",
    "0xffffe80001", "0xffffe74001", "0xffffd6c001", "0xffffd44001",
    "0xffffd0c001", "0xffffca8001", "0xffffc9c001", "0xffffc64001",
    "0xffffc40001", "0xffffbf4001", "0xffffb20001", "0xffffaf8001",
    "0xffffaec001", "0xffffa78001", "0xffffa24001", "0xffff99c001",
    "0xffff994001", "0xffffffffff4c001",
)
_BOOT_SPECIAL = _hex_tuple(
    "0xfffffffffffc001", "0xffffffffffe8001", "0xffffffffffd8001",
    "0xffffffffffc4001", "0xffffffffffc0001",
)


def _builtin_presets():
    return {
        # Full-size parameters: one 60-bit base prime, 51/52-bit rescale
        # primes, 1540 bits total, L=29. Used for size accounting and
        # (optionally) long runs; CI never evaluates at N=2^17.
        "paper": CkksParams(
            ring=RingParams("paper", 1 << 17, _PAPER_CHAIN, _PAPER_SPECIAL),
            default_scale=float(1 << 40),
            security_preset_name="128-bit (per the cited lattice estimator)",
            dnum=8,
        ),
        # Small test parameters. NOT claimed secure: N=2^13 with a 380-bit
        # chain exists so the whole pipeline runs in CI minutes.
        "desk": CkksParams(
            ring=RingParams("desk", 1 << 13, _DESK_CHAIN, _DESK_SPECIAL),
            default_scale=float(1 << 40),
            security_preset_name="insecure-test-only",
            dnum=3,
        ),
        # Bootstrap-capable small parameters. NOT claimed secure. The chain
        # is q0 (50b), 20 homogeneous 40-bit limbs (scales stay near the
        # default through deep circuits), and one 60-bit top prime that the
        # CoeffToSlot transform consumes (its matrix plaintexts encode at
        # that prime's scale; SlotToCoeff amplifies CoeffToSlot noise by up
        # to (q0/scale)*2n, so that noise must start tiny). The sparse
        # secret (h=64) keeps the reduction range small enough for a
        # practical sine approximant.
        "desk-boot": CkksParams(
            ring=RingParams("desk-boot", 1 << 13, _BOOT_CHAIN, _BOOT_SPECIAL),
            default_scale=float(1 << 40),
            security_preset_name="insecure-test-only",
            dnum=4,
            secret_hamming_weight=64,
        ),
    }


PRESET_NAMES = ("paper", "desk", "desk-boot")


def get_preset(name):
    """Load a preset: HEBERT_PRESET_DIR/<name>.preset first, then builtins."""
    preset_dir = os.environ.get("HEBERT_PRESET_DIR")
    if preset_dir:
        path = os.path.join(preset_dir, f"{name}.preset")
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                return CkksParams.from_config_text(fh.read())
    presets = _builtin_presets()
    if name not in presets:
        raise CryptoError(f"unknown preset {name!r} (have {sorted(presets)})")
    return presets[name]
