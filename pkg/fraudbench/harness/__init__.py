from .emit import emit_correlation_csv, emit_roc_csv, emit_roc_svg, emit_scatter_svg
from .pipeline import PipelineState, run_pipeline
from .verify import verify_run
