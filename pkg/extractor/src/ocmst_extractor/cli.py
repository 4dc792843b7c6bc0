"""Command line entry point: one extraction per invocation."""

from __future__ import annotations

import sys

import click

from .datasets import DATASET_NAMES, load_split, preprocessing_text
from .errors import ExtractionError
from .extract import extract_features
from .model import LAYER_NAME, load_backbone


@click.command()
@click.option("--dataset", type=click.Choice(DATASET_NAMES), required=True,
              help="Image collection to extract from.")
@click.option("--split", type=click.Choice(("train", "test")), required=True)
@click.option("--output", required=True, type=str,
              help="Feature file to write; a .json sidecar lands next to it.")
@click.option("--batch-size", type=int, default=64, show_default=True)
@click.option("--limit", type=int, default=None,
              help="Stop after this many images (smoke runs).")
@click.option("--data-root", type=str, default="data", show_default=True,
              help="Where dataset archives live or get downloaded to.")
@click.option("--weights", type=str, default="pretrained", show_default=True,
              help='"pretrained", "random", or a path to a saved state dict.')
@click.option("--seed", type=int, default=0, show_default=True,
              help="Init seed when --weights random.")
@click.option("--no-download", is_flag=True,
              help="Fail instead of fetching a missing dataset.")
def main(dataset, split, output, batch_size, limit, data_root, weights, seed,
         no_download):
    """Extract 4096-wide image features into the shared feature-file format."""
    try:
        model, weights_info = load_backbone(weights, seed=seed)
        data = load_split(dataset, split, data_root, download=not no_download)
        sidecar = {
            "dataset": dataset,
            "split": split,
            "layer": LAYER_NAME,
            "weights": weights_info,
            "preprocessing": preprocessing_text(dataset),
            "batch_size": batch_size,
        }
        rows = extract_features(
            model, data, output,
            batch_size=batch_size, limit=limit, sidecar=sidecar,
        )
    except ExtractionError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(f"wrote {rows} rows to {output} (sidecar {output}.json)")


if __name__ == "__main__":
    main()
