"""tokcascade: a two-stage discrete-token speech-synthesis cascade.

Stage one turns text plus a semantic prompt into semantic tokens with a
monotonic-alignment transducer; stage two turns semantic tokens plus an
acoustic prompt into a grouped residual-VQ acoustic token grid with a
grouped masked language model decoded by iterative parallel sampling.
Everything runs at desk scale on a synthetic corpus with exact oracles.
"""

__version__ = "0.1.0"
