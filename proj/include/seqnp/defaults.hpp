#pragma once

#include <cstddef>

namespace seqnp::defaults {

// Training protocol
inline constexpr std::size_t kSeqLenMin = 35;
inline constexpr std::size_t kSeqLenMax = 70;
inline constexpr std::size_t kMinContext = 3;
inline constexpr double kMixProb = 0.5;  // P(context labels come from the pseudo-label head)
inline constexpr std::size_t kEpochs = 25;
inline constexpr std::size_t kItersPerEpoch = 1000;

// Optimizer
inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

// Per-task defaults
inline constexpr std::size_t kVaBatchSize = 16;
inline constexpr double kVaLearningRate = 0.00025;
inline constexpr double kVaWeightDecay = 0.0001;
inline constexpr std::size_t kAuBatchSize = 6;
inline constexpr double kAuLearningRate = 0.0001;
inline constexpr double kAuWeightDecay = 0.0005;

// Loss weights
inline constexpr double kLambdaKl = 1.0;
inline constexpr double kLambdaReg = 1.0;

// Evaluation protocol
inline constexpr std::size_t kEvalWindowLen = 70;
inline constexpr std::size_t kEvalNumContext = 40;

// Architecture
inline constexpr std::size_t kFeatureDim = 512;
inline constexpr std::size_t kReprDim = 128;  // r_c and z
inline constexpr std::size_t kEncoderHidden1 = 512;
inline constexpr std::size_t kEncoderHidden2 = 256;
inline constexpr std::size_t kDecoderHidden1 = 256;
inline constexpr std::size_t kDecoderHidden2 = 128;
inline constexpr std::size_t kDecoderHidden3 = 64;
inline constexpr double kSigmaMin = 0.01;
inline constexpr std::size_t kAttentionHeads = 2;
inline constexpr std::size_t kAttentionDim = 64;

// Dataset partition
inline constexpr double kTrainRatio = 0.8;
inline constexpr double kValRatio = 0.1;
inline constexpr double kTestRatio = 0.1;

}  // namespace seqnp::defaults
