"""Server power-class estimation from cooling-fan acoustics.

Pipeline: WAV + power log -> 20 s segments -> DFT magnitudes in the fan band
-> full or max-binned features -> two-hidden-layer tansig network -> one of
four equal-width power classes.
"""
from .audio_io import AudioSegment, AudioSignal, PowerTrace, read_power_csv, read_wav, segment_and_align, write_wav
from .labeling import ClassBounds, PowerClass, classify_watts, decode, encode, fit_bounds
from .mlp import MlpModel, Network, NetworkShape, TrainConfig, hidden_sizes, load_model, save_model, tansig, train
from .spectral import BandSpec, FeatureVector, Spectrum, dft_magnitudes, full_features, reduced_features

__version__ = "0.1.0"
