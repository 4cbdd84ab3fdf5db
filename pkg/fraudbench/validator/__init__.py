from .metrics import (
    confusion_matrix,
    evaluate,
    macro_average,
    per_class_metrics,
    precision_recall_f1,
    roc_auc,
    roc_curve,
    trapezoid_auc,
    weighted_average,
)
