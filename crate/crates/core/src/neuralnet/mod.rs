//! The trainable pipeline: query/key generators, encoder, decoder and the
//! general-attention matrix, with hand-derived backpropagation through the
//! softmax matching rows and the fusion.

pub mod adam;
pub mod checkpoint;
pub mod mlp;
pub mod pipeline;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use mlp::{mlp_backward, mlp_forward, Layer, MlpCache, MlpParams};
pub use pipeline::{
    accumulate_backward, cross_entropy_loss, decoder_input, forward_with, pipeline_backward, pipeline_forward,
    ForwardCache, ForwardOutput, Fusion, Gradients, Mode, PipelineDims, PipelineParams,
};
pub use train::{
    argmax, batch_loss_and_grad, inference_fusion, random_peer, train, train_from, training_fusion, EvalRecord,
    TrainConfig, TrainLog,
};
