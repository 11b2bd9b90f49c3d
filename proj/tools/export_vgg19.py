#!/usr/bin/env python3
"""Export torchvision VGG-19 convolution weights for the perceptual loss.

Writes a blob archive with `features.<i>.weight` / `features.<i>.bias`
entries (float32), readable by pathosr's load_feature_extractor.

    python3 tools/export_vgg19.py --out vgg19.blob
"""

import argparse
import struct
import sys

import torch
import torchvision

MAGIC = b"PSRBLOB\0"
FORMAT_VERSION = 1
FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
MASK64 = (1 << 64) - 1


def fnv1a(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & MASK64
    return h


def write_archive(path, tensors):
    buf = bytearray(MAGIC)
    buf += struct.pack("<IQ", FORMAT_VERSION, len(tensors))
    for name in sorted(tensors):
        t = tensors[name].detach().to(torch.float32).contiguous().cpu()
        encoded = name.encode()
        buf += struct.pack("<I", len(encoded)) + encoded
        buf += struct.pack("<BI", 0, t.dim())
        buf += struct.pack(f"<{t.dim()}q", *t.shape)
        raw = t.numpy().tobytes()
        buf += struct.pack("<Q", len(raw)) + raw
    buf += struct.pack("<Q", fnv1a(bytes(buf)))
    with open(path, "wb") as f:
        f.write(buf)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--random", action="store_true", help="skip the ImageNet download (format testing only)")
    args = ap.parse_args()

    weights = None if args.random else torchvision.models.VGG19_Weights.IMAGENET1K_V1
    model = torchvision.models.vgg19(weights=weights)
    tensors = {f"features.{k}": v for k, v in model.features.state_dict().items()}
    write_archive(args.out, tensors)
    print(f"wrote {len(tensors)} tensors to {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
