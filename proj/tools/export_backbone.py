#!/usr/bin/env python3
"""Export a Keras-applications backbone as an rpca graph manifest + weight archive.

Produces <out>/<name>/graph.json (topology, explicit padding, weight shapes)
and optionally <out>/<name>/weights.bin in the rpca tensor-archive format.

Requires tensorflow/keras. Typical uses:

  # topology manifest only (no network access needed)
  python3 tools/export_backbone.py --backbone resnet50 --weights none --out assets/backbones --manifest-only

  # full archive with ImageNet weights (downloads via keras)
  python3 tools/export_backbone.py --backbone resnet50 --weights imagenet --out "$RPCA_WEIGHTS_DIR"
"""

import argparse
import json
import os
import struct
import sys

BACKBONES = {
    "resnet50": ("ResNet50", 2048),
    "xception": ("Xception", 2048),
    "inceptionv3": ("InceptionV3", 2048),
    "mobilenetv2": ("MobileNetV2", 1280),
}

INPUT_SIDE = 224


def same_pads(in_h, in_w, kh, kw, sh, sw):
    out_h = -(-in_h // sh)
    out_w = -(-in_w // sw)
    pad_h = max((out_h - 1) * sh + kh - in_h, 0)
    pad_w = max((out_w - 1) * sw + kw - in_w, 0)
    return [pad_h // 2, pad_h - pad_h // 2, pad_w // 2, pad_w - pad_w // 2]


def resolve_pads(layer, kh, kw, sh, sw):
    if layer.padding == "valid":
        return [0, 0, 0, 0]
    shape = layer.input.shape  # (None, H, W, C)
    return same_pads(int(shape[1]), int(shape[2]), kh, kw, sh, sw)


def weight_entry(tensor_name, arr):
    return {"id": tensor_name, "shape": [int(d) for d in arr.shape]}


def export_graph(model, name, feature_channels):
    nodes = []
    tensors = {}  # archive key -> ndarray
    # Keras tensor producer -> rpca node name (activations split out of convs, etc.)
    alias = {}

    def src_names(layer):
        ins = layer.input if isinstance(layer.input, list) else [layer.input]
        out = []
        for t in ins:
            prod = t._keras_history.operation.name
            out.append(alias.get(prod, prod))
        return out

    for layer in model.layers:
        lt = type(layer).__name__
        lname = layer.name
        if lt == "InputLayer":
            alias[lname] = "__input__"
            continue
        inputs = src_names(layer)

        if lt == "Conv2D":
            assert layer.groups == 1 and tuple(layer.dilation_rate) == (1, 1), lname
            kernel = layer.get_weights()[0]
            kh, kw = kernel.shape[0], kernel.shape[1]
            sh, sw = layer.strides
            node = {
                "name": lname, "op": "conv2d", "inputs": inputs,
                "strides": [sh, sw], "pads": resolve_pads(layer, kh, kw, sh, sw),
                "weights": [weight_entry("kernel", kernel)],
            }
            tensors[f"{lname}/kernel"] = kernel
            if layer.use_bias:
                bias = layer.get_weights()[1]
                node["weights"].append(weight_entry("bias", bias))
                tensors[f"{lname}/bias"] = bias
            nodes.append(node)
            act = layer.activation.__name__
            if act == "relu":
                nodes.append({"name": f"{lname}__act", "op": "relu", "inputs": [lname]})
                alias[lname] = f"{lname}__act"
            else:
                assert act == "linear", f"{lname}: {act}"
        elif lt == "DepthwiseConv2D":
            kernel = layer.get_weights()[0]
            assert kernel.shape[3] == 1, lname
            kh, kw = kernel.shape[0], kernel.shape[1]
            sh, sw = layer.strides
            node = {
                "name": lname, "op": "depthwise_conv2d", "inputs": inputs,
                "strides": [sh, sw], "pads": resolve_pads(layer, kh, kw, sh, sw),
                "weights": [weight_entry("kernel", kernel)],
            }
            tensors[f"{lname}/kernel"] = kernel
            if layer.use_bias:
                bias = layer.get_weights()[-1]
                node["weights"].append(weight_entry("bias", bias))
                tensors[f"{lname}/bias"] = bias
            nodes.append(node)
            assert layer.activation.__name__ == "linear", lname
        elif lt == "SeparableConv2D":
            ws = layer.get_weights()
            dw_kernel, pw_kernel = ws[0], ws[1]
            kh, kw = dw_kernel.shape[0], dw_kernel.shape[1]
            sh, sw = layer.strides
            dw_name = f"{lname}__dw"
            nodes.append({
                "name": dw_name, "op": "depthwise_conv2d", "inputs": inputs,
                "strides": [sh, sw], "pads": resolve_pads(layer, kh, kw, sh, sw),
                "weights": [weight_entry("kernel", dw_kernel)],
            })
            tensors[f"{dw_name}/kernel"] = dw_kernel
            node = {
                "name": lname, "op": "conv2d", "inputs": [dw_name],
                "strides": [1, 1], "pads": [0, 0, 0, 0],
                "weights": [weight_entry("kernel", pw_kernel)],
            }
            tensors[f"{lname}/kernel"] = pw_kernel
            if layer.use_bias:
                node["weights"].append(weight_entry("bias", ws[2]))
                tensors[f"{lname}/bias"] = ws[2]
            nodes.append(node)
            assert layer.activation.__name__ == "linear", lname
        elif lt == "BatchNormalization":
            axis = layer.axis if isinstance(layer.axis, int) else layer.axis[0]
            assert axis in (-1, 3), lname
            ws = list(layer.get_weights())
            entries = []
            if layer.scale:
                entries.append(("gamma", ws.pop(0)))
            if layer.center:
                entries.append(("beta", ws.pop(0)))
            entries.append(("mean", ws.pop(0)))
            entries.append(("variance", ws.pop(0)))
            node = {
                "name": lname, "op": "batch_norm", "inputs": inputs,
                "epsilon": float(layer.epsilon),
                "weights": [weight_entry(k, v) for k, v in entries],
            }
            for k, v in entries:
                tensors[f"{lname}/{k}"] = v
            nodes.append(node)
        elif lt == "Activation":
            assert layer.activation.__name__ == "relu", lname
            nodes.append({"name": lname, "op": "relu", "inputs": inputs})
        elif lt == "ReLU":
            assert float(layer.negative_slope) == 0.0 and float(layer.threshold) == 0.0, lname
            op = "relu" if layer.max_value is None else "relu6"
            if op == "relu6":
                assert float(layer.max_value) == 6.0, lname
            nodes.append({"name": lname, "op": op, "inputs": inputs})
        elif lt == "ZeroPadding2D":
            ((t, b), (l, r)) = layer.padding
            nodes.append({"name": lname, "op": "zero_pad", "inputs": inputs,
                          "pads": [int(t), int(b), int(l), int(r)]})
        elif lt in ("MaxPooling2D", "AveragePooling2D"):
            ph, pw = layer.pool_size
            sh, sw = layer.strides
            nodes.append({
                "name": lname, "op": "max_pool" if lt == "MaxPooling2D" else "avg_pool",
                "inputs": inputs, "pool": [ph, pw], "strides": [sh, sw],
                "pads": resolve_pads(layer, ph, pw, sh, sw),
            })
        elif lt == "Add":
            nodes.append({"name": lname, "op": "add", "inputs": inputs})
        elif lt == "Concatenate":
            assert layer.axis in (-1, 3), lname
            nodes.append({"name": lname, "op": "concat", "inputs": inputs})
        else:
            raise SystemExit(f"unsupported layer type {lt} ({lname})")

    out_layer = model.output._keras_history.operation.name
    graph = {
        "format": "rpca-graph-v1",
        "name": name,
        "input_side": INPUT_SIDE,
        "input_channels": 3,
        "feature_channels": feature_channels,
        "feature_hw": [int(model.output.shape[1]), int(model.output.shape[2])],
        "preprocessing": "bgr_zero_center",
        "provenance": f"keras-applications topology export ({name})",
        "output": alias.get(out_layer, out_layer),
        "nodes": nodes,
    }
    return graph, tensors


def write_archive(path, tensors):
    with open(path, "wb") as f:
        f.write(b"RPCAW001")
        f.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            data = arr.astype("<f4").tobytes()
            enc = name.encode()
            f.write(struct.pack("<I", len(enc)))
            f.write(enc)
            f.write(struct.pack("<B", 0))
            f.write(struct.pack("<I", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<I", d))
            f.write(struct.pack("<Q", len(data)))
            f.write(data)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--backbone", required=True, choices=sorted(BACKBONES))
    ap.add_argument("--weights", default="imagenet", choices=["imagenet", "none"])
    ap.add_argument("--out", required=True)
    ap.add_argument("--manifest-only", action="store_true",
                    help="write graph.json only (no weights.bin)")
    args = ap.parse_args()

    os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "3")
    from tensorflow import keras

    cls_name, channels = BACKBONES[args.backbone]
    ctor = getattr(keras.applications, cls_name)
    weights = None if args.weights == "none" else "imagenet"
    model = ctor(weights=weights, include_top=False,
                 input_shape=(INPUT_SIDE, INPUT_SIDE, 3))

    graph, tensors = export_graph(model, args.backbone, channels)
    total = sum(int(__import__("numpy").prod(t.shape)) for t in tensors.values())
    print(f"{args.backbone}: {len(graph['nodes'])} nodes, {total} parameters, "
          f"feature map {graph['feature_hw']}x{channels}")

    if args.manifest_only:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"{args.backbone}.graph.json")
        with open(path, "w") as f:
            json.dump(graph, f, indent=1)
            f.write("\n")
        print(f"wrote {path}")
    else:
        d = os.path.join(args.out, args.backbone)
        os.makedirs(d, exist_ok=True)
        with open(os.path.join(d, "graph.json"), "w") as f:
            json.dump(graph, f, indent=1)
            f.write("\n")
        write_archive(os.path.join(d, "weights.bin"), tensors)
        print(f"wrote {d}/graph.json and {d}/weights.bin")


if __name__ == "__main__":
    sys.exit(main())
