# Copyright 2026 The xtrans Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Converts torchvision VGG-19 convolution weights up to relu5_1 into an
xtrans archive of kind "vgg19-features".

    python3 scripts/convert_vgg19.py --out vgg19_features.xtar
    python3 scripts/convert_vgg19.py --state-dict vgg19-dcbb9e9d.pth --out vgg19_features.xtar

--random-init writes seeded random weights; it exists for parity testing of
the C++ forward pass and is useless for training. --probe also writes the
five tapped activations for a seeded input next to the archive.
"""

import argparse
import json
import struct
import sys

import numpy as np
import torch
import torchvision

CONV_INDICES = [0, 2, 5, 7, 10, 12, 14, 16, 19, 21, 23, 25, 28]
TAPS = [1, 6, 11, 20, 29]  # relu1_1 ... relu5_1
FORMAT_VERSION = 1


def write_archive(path, kind, meta, tensors):
    index, offset, blobs = [], 0, []
    for name, array in tensors:
        array = np.ascontiguousarray(array, dtype="<f4")
        index.append({"name": name, "shape": list(array.shape), "offset": offset})
        offset += array.nbytes
        blobs.append(array.tobytes())
    header = json.dumps({"kind": kind, "meta": meta, "tensors": index}).encode()
    with open(path, "wb") as f:
        f.write(b"XTRANSAR")
        f.write(struct.pack("<IIQ", FORMAT_VERSION, 0, len(header)))
        f.write(header)
        for blob in blobs:
            f.write(blob)


def load_model(args):
    if args.random_init:
        torch.manual_seed(args.seed)
        return torchvision.models.vgg19(weights=None)
    model = torchvision.models.vgg19(weights=None)
    if args.state_dict:
        model.load_state_dict(torch.load(args.state_dict, map_location="cpu"))
    else:
        model = torchvision.models.vgg19(weights=torchvision.models.VGG19_Weights.IMAGENET1K_V1)
    return model


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out", required=True)
    parser.add_argument("--state-dict", help="local torchvision VGG-19 .pth file")
    parser.add_argument("--random-init", action="store_true")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--probe", type=int, default=0, metavar="SIZE",
                        help="also write <out>.probe with activations of a seeded SIZE x SIZE input")
    args = parser.parse_args()

    model = load_model(args).eval()
    tensors = []
    for i in CONV_INDICES:
        conv = model.features[i]
        tensors.append((f"features.{i}.weight", conv.weight.detach().numpy()))
        tensors.append((f"features.{i}.bias", conv.bias.detach().numpy()))
    source = "random" if args.random_init else (args.state_dict or "torchvision IMAGENET1K_V1")
    write_archive(args.out, "vgg19-features", {"source": source}, tensors)
    print(f"wrote {args.out}")

    if args.probe:
        rng = np.random.default_rng(args.seed)
        x = rng.random((1, 3, args.probe, args.probe), dtype=np.float32)
        mean = torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1)
        std = torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1)
        h = (torch.from_numpy(x) - mean) / std
        taps = []
        with torch.no_grad():
            for i, layer in enumerate(model.features[:30]):
                h = layer(h)
                if i in TAPS:
                    taps.append((f"tap{len(taps)}", h.numpy()))
        write_archive(args.out + ".probe", "vgg19-probe", {"seed": args.seed}, [("input", x)] + taps)
        print(f"wrote {args.out}.probe")
    return 0


if __name__ == "__main__":
    sys.exit(main())
