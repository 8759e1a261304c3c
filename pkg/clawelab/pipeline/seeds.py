import hashlib


def derive_seed(base_seed: int, *labels) -> int:
    """
    Derive a child seed from a base seed and any number of labels.
    Stable across processes (no reliance on Python's salted hash).
    """
    text = "|".join([str(int(base_seed))] + [str(label) for label in labels])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & 0x7FFF_FFFF_FFFF_FFFF
