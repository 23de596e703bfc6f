"""Service layer: flow codec, loss, saliency, mapping, training and evaluation."""
