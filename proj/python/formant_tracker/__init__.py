"""Python access to the formant tracker core."""

try:
    from . import _formant
except ImportError:  # in-tree build: the extension sits next to the package
    import _formant

Model = _formant.Model
dequantize = _formant.dequantize
lpc_track = _formant.lpc_track
quantize = _formant.quantize
spectrogram = _formant.spectrogram
synthesize = _formant.synthesize
tracking_mae = _formant.tracking_mae

__all__ = [
    "Model",
    "dequantize",
    "lpc_track",
    "quantize",
    "spectrogram",
    "synthesize",
    "tracking_mae",
]
