//! Model assembly, losses, routing, training, serving and metrics.

mod gradcheck;
mod loss;
mod metrics;
mod model;
mod routing;
mod serve;
mod train;

pub use gradcheck::{
    analytic_gradient, grad_check, grad_check_with, toy_batch, GradBatch, GradCheckReport, GRAD_CHECK_STEP,
    GRAD_CHECK_TOLERANCE,
};
pub use loss::{compute_loss, LossOutput};
pub use metrics::{
    auc, logloss, mse, overfit_report, GapSeries, MetricKind, MetricsReport, OverfitRow, RegionMetrics, TaskMetrics,
};
pub use model::{
    forward_subset, init_model, model_backward, model_forward, parameterized_nodes, ModelCache, ModelParams, NodeParams,
};
pub use routing::{routing_masks, serves, RoutingPolicy};
pub use serve::{serve_predict, serving_subgraph};
pub use train::{evaluate, predict_rows, train, train_from, LrSchedule, Predictor, SerialPredictor, TrainConfig};
