#!/usr/bin/env python3
"""Emit the built-in architecture manifests under crates/core/data/arch/.

The JSON files are committed; rerun this only when a topology changes.
"""
import json
import os
import sys

SCHEMA = "sketchprune-manifest-v1"


class Net:
    def __init__(self, name, input_spatial, input_channels, num_classes):
        self.name = name
        self.input_spatial = input_spatial
        self.num_classes = num_classes
        self.layers = []
        self.edges = []
        self.out = {}
        self.input_channels = input_channels

    def _add(self, spec, src):
        self.layers.append(spec)
        for s in src:
            self.edges.append([s, spec["name"]])
        self.out[spec["name"]] = spec["out_channels"]
        return spec["name"]

    def width(self, src):
        return self.out[src] if src is not None else self.input_channels

    def conv(self, name, src, out, k, stride=1, padding=0, group=None, prunable=False, bias=False):
        spec = dict(name=name, kind="conv", out_channels=out, in_channels=self.width(src),
                    kernel_h=k, kernel_w=k, stride=stride, padding=padding,
                    prunable=prunable, bias=bias)
        if group:
            spec["prune_group"] = group
        return self._add(spec, [] if src is None else [src])

    def bn(self, name, src):
        c = self.width(src)
        return self._add(dict(name=name, kind="bn", out_channels=c, in_channels=c,
                              kernel_h=1, kernel_w=1, stride=1, padding=0, prunable=False), [src])

    def pool(self, name, src, k, stride, padding, global_pool=False, out=None):
        c = self.width(src)
        spec = dict(name=name, kind="pool", out_channels=out or c, in_channels=c,
                    kernel_h=k, kernel_w=k, stride=stride, padding=padding, prunable=False)
        if global_pool:
            spec["global"] = True
        return self._add(spec, [src])

    def add(self, name, srcs):
        c = self.width(srcs[0])
        return self._add(dict(name=name, kind="add", out_channels=c, in_channels=c,
                              kernel_h=1, kernel_w=1, stride=1, padding=0, prunable=False), srcs)

    def concat(self, name, srcs):
        c = sum(self.width(s) for s in srcs)
        return self._add(dict(name=name, kind="concat", out_channels=c, in_channels=c,
                              kernel_h=1, kernel_w=1, stride=1, padding=0, prunable=False), srcs)

    def fc(self, name, src, out):
        return self._add(dict(name=name, kind="fc", out_channels=out, in_channels=self.width(src),
                              kernel_h=1, kernel_w=1, stride=1, padding=0, prunable=False,
                              bias=True), [src])

    def dump(self):
        return dict(schema=SCHEMA, name=self.name, input_spatial=self.input_spatial,
                    num_classes=self.num_classes, layers=self.layers, edges=self.edges)


def cifar_resnet(depth):
    n = (depth - 2) // 6
    net = Net(f"resnet{depth}", [32, 32], 3, 10)
    x = net.conv("conv1", None, 16, 3, 1, 1, group="stage1")
    x = net.bn("bn1", x)
    planes = 16
    for stage in range(3):
        width = 16 * 2 ** stage
        group = f"stage{stage + 1}"
        for b in range(n):
            p = f"layer{stage + 1}.{b}"
            stride = 2 if (stage > 0 and b == 0) else 1
            y = net.conv(f"{p}.conv1", x, width, 3, stride, 1, prunable=True)
            y = net.bn(f"{p}.bn1", y)
            y = net.conv(f"{p}.conv2", y, width, 3, 1, 1, group=group)
            y = net.bn(f"{p}.bn2", y)
            short = x
            if stride != 1 or planes != width:
                # parameter-free shortcut: subsample spatially, zero-pad channels
                short = net.pool(f"{p}.shortcut", x, 1, stride, 0, out=width)
            x = net.add(f"{p}.add", [y, short])
            planes = width
    x = net.pool("avgpool", x, 8, 1, 0, global_pool=True)
    net.fc("fc", x, 10)
    return net


def resnet50():
    net = Net("resnet50", [224, 224], 3, 1000)
    x = net.conv("conv1", None, 64, 7, 2, 3)
    x = net.bn("bn1", x)
    x = net.pool("maxpool", x, 3, 2, 1)
    inplanes = 64
    for stage, (width, blocks) in enumerate([(64, 3), (128, 4), (256, 6), (512, 3)]):
        group = f"stage{stage + 1}"
        for b in range(blocks):
            p = f"layer{stage + 1}.{b}"
            stride = 2 if (stage > 0 and b == 0) else 1
            y = net.conv(f"{p}.conv1", x, width, 1, 1, 0, prunable=True)
            y = net.bn(f"{p}.bn1", y)
            y = net.conv(f"{p}.conv2", y, width, 3, stride, 1, prunable=True)
            y = net.bn(f"{p}.bn2", y)
            y = net.conv(f"{p}.conv3", y, width * 4, 1, 1, 0, group=group)
            y = net.bn(f"{p}.bn3", y)
            short = x
            if b == 0:
                short = net.conv(f"{p}.downsample.conv", x, width * 4, 1, stride, 0, group=group)
                short = net.bn(f"{p}.downsample.bn", short)
            x = net.add(f"{p}.add", [y, short])
            inplanes = width * 4
    x = net.pool("avgpool", x, 7, 1, 0, global_pool=True)
    net.fc("fc", x, 1000)
    return net


def googlenet():
    net = Net("googlenet", [32, 32], 3, 10)
    x = net.conv("pre.conv", None, 192, 3, 1, 1, bias=True)
    x = net.bn("pre.bn", x)

    def inception(name, src, n1, n3r, n3, n5r, n5, pp, last=False):
        outs = []
        b = net.conv(f"{name}.b1.conv", src, n1, 1, bias=True, prunable=not last)
        outs.append(net.bn(f"{name}.b1.bn", b))
        b = net.conv(f"{name}.b2.conv1", src, n3r, 1, bias=True, prunable=True)
        b = net.bn(f"{name}.b2.bn1", b)
        b = net.conv(f"{name}.b2.conv2", b, n3, 3, 1, 1, bias=True, prunable=not last)
        outs.append(net.bn(f"{name}.b2.bn2", b))
        b = net.conv(f"{name}.b3.conv1", src, n5r, 1, bias=True, prunable=True)
        b = net.bn(f"{name}.b3.bn1", b)
        b = net.conv(f"{name}.b3.conv2", b, n5, 3, 1, 1, bias=True, prunable=True)
        b = net.bn(f"{name}.b3.bn2", b)
        b = net.conv(f"{name}.b3.conv3", b, n5, 3, 1, 1, bias=True, prunable=not last)
        outs.append(net.bn(f"{name}.b3.bn3", b))
        b = net.pool(f"{name}.b4.pool", src, 3, 1, 1)
        b = net.conv(f"{name}.b4.conv", b, pp, 1, bias=True, prunable=not last)
        outs.append(net.bn(f"{name}.b4.bn", b))
        return net.concat(f"{name}.concat", outs)

    x = inception("a3", x, 64, 96, 128, 16, 32, 32)
    x = inception("b3", x, 128, 128, 192, 32, 96, 64)
    x = net.pool("maxpool3", x, 3, 2, 1)
    x = inception("a4", x, 192, 96, 208, 16, 48, 64)
    x = inception("b4", x, 160, 112, 224, 24, 64, 64)
    x = inception("c4", x, 128, 128, 256, 24, 64, 64)
    x = inception("d4", x, 112, 144, 288, 32, 64, 64)
    x = inception("e4", x, 256, 160, 320, 32, 128, 128)
    x = net.pool("maxpool4", x, 3, 2, 1)
    x = inception("a5", x, 256, 160, 320, 32, 128, 128)
    x = inception("b5", x, 384, 192, 384, 48, 128, 128, last=True)
    x = net.pool("avgpool", x, 8, 1, 0, global_pool=True)
    net.fc("fc", x, 10)
    return net


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(__file__), "..", "crates", "core", "data", "arch")
    for net in [cifar_resnet(56), cifar_resnet(110), resnet50(), googlenet()]:
        with open(os.path.join(out_dir, f"{net.name}.json"), "w") as f:
            json.dump(net.dump(), f, indent=2)
            f.write("\n")


if __name__ == "__main__":
    main()
