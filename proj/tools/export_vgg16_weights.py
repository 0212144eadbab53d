#!/usr/bin/env python3
"""Export torchvision's pretrained VGG16 conv trunk for the C++ extractor.

Saves the first three conv blocks (conv1_1 .. conv3_3) under the parameter
names the C++ module registers, in a libtorch-loadable archive. Requires
torchvision and a network connection (or a cached download).

Usage: python3 tools/export_vgg16_weights.py [--out vgg16_trunk.pt]
"""

import argparse

import torch
from torchvision.models import VGG16_Weights, vgg16

# index into vgg16().features -> name registered by the C++ trunk
CONV_NAMES = {
    0: "conv1_1",
    2: "conv1_2",
    5: "conv2_1",
    7: "conv2_2",
    10: "conv3_1",
    12: "conv3_2",
    14: "conv3_3",
}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="vgg16_trunk.pt", help="output archive path")
    args = parser.parse_args()

    features = vgg16(weights=VGG16_Weights.IMAGENET1K_V1).features.eval()

    container = torch.nn.Module()
    for idx, name in CONV_NAMES.items():
        layer = features[idx]
        assert isinstance(layer, torch.nn.Conv2d), f"features[{idx}] is not Conv2d"
        container.add_module(name, layer)

    # torch.jit trace-free save: libtorch Module::load reads named parameters
    scripted = torch.jit.script(container)
    scripted.save(args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
