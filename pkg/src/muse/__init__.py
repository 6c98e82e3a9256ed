"""Triple-path operator-search model for multimodal binary classification.

The package is organised bottom-up:

* :mod:`muse.autograd` -- float64 reverse-mode AD engine;
* :mod:`muse.rng` -- named, splittable random streams;
* :mod:`muse.features` -- feature matrices, global-local guidance,
  partial-modality handling;
* :mod:`muse.searchspace` -- fusion / transformation operator registries;
* :mod:`muse.cells` -- architecture weights, relaxed cells, discretisation;
* :mod:`muse.paths` -- linear, sequence and static classification paths;
* :mod:`muse.model` -- full model, combiner, search and retraining loops;
* :mod:`muse.data` -- synthetic corpus generation and the on-disk formats;
* :mod:`muse.harness` -- metrics, experiment runner, ablations;
* :mod:`muse.cli` -- command-line entry point.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
