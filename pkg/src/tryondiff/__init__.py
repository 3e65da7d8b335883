"""Scale-configurable latent-diffusion virtual try-on pipeline."""

__version__ = "0.1.0"
