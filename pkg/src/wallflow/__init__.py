"""Channel-flow drag-reduction toolkit.

Subpackages cover the staggered-grid DNS environment, discrete field
operators, a small reverse-mode autodiff layer, neural-operator models,
their training losses, controllers plus the training loop, flow
diagnostics, and file/CLI plumbing.
"""

__version__ = "0.1.0"
