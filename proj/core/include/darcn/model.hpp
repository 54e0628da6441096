#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "darcn/layers.hpp"
#include "darcn/stft.hpp"
#include "darcn/tensor.hpp"

namespace darcn {

struct ArchConfig {
  std::size_t stages = 3;
  std::size_t feature_len = 161;
  std::vector<std::size_t> agm_enc_ch{16, 32, 32, 64, 64};
  std::vector<std::size_t> agm_dec_ch{64, 64, 32, 32};
  std::vector<std::size_t> nrm_enc_ch{16, 16, 32, 32, 64, 64};
  std::vector<std::size_t> nrm_dec_ch{64, 32, 32, 16, 16, 1};
  // Frequency widths after the input and each of the six encoder convs; the
  // generator module encoder stops one short of the bottleneck width.
  std::vector<std::size_t> f_chain{161, 81, 41, 21, 11, 6, 4};
  std::size_t glu_count = 6;
  std::vector<std::size_t> glu_dilations{1, 2, 4, 8, 16, 32};
  std::size_t glu_width = 64;
  std::size_t glu_kernel = 3;
  std::size_t bottleneck = 256;
  std::size_t kt = 2, kf = 5, st = 1, sf = 2;

  static ArchConfig paper();
  static ArchConfig tiny();
  static ArchConfig from_preset(const std::string& name);  // "paper" | "tiny"
  static ArchConfig for_feature_len(std::size_t f);        // checkpoint loading

  // Analysis front-end implied by the feature length: fft = (F-1)*2,
  // window = fft, hop = fft/2.
  StftConfig stft() const;
  void validate() const;
};

struct StageTrace {
  Tensor estimate;               // [B, T, F], nonnegative
  std::vector<Tensor> attention; // gate maps for encoder layers 1..5, each in (0,1)
  Shape bottleneck_shape;        // [B, T, bottleneck]
  double stage_loss = 0.0;       // filled by accumulated_loss
};

struct LayerCount {
  std::string name;
  std::size_t count = 0;
};

class DarcnModel {
 public:
  DarcnModel(const ArchConfig& cfg, Rng& rng);

  // input: [B,T,F] noisy magnitude, or [B,T,F,2] with channel 0 the noisy
  // magnitude and channel 1 the initial estimate. One trace per stage; the
  // last trace's estimate is the final answer. The recurrent state starts at
  // zero and threads through all stages.
  std::vector<StageTrace> forward(const Tensor& input, std::size_t stages, bool train);

  // Sum of per-stage masked mean-square errors, equal weight per stage.
  // mask: [B,T] with 1 on valid frames, or undefined for no masking.
  Tensor accumulated_loss(std::vector<StageTrace>& traces, const Tensor& target,
                          const Tensor& mask);

  ParamList parameters();             // every named tensor, running stats included
  ParamList trainable_parameters();   // optimizer view
  std::vector<LayerCount> count_parameters(std::size_t* total = nullptr);

  const ArchConfig& config() const { return cfg_; }

  // Saturates every generator gate at 1, turning the gating into an identity;
  // test hook for the modulation contract.
  bool force_unit_gates = false;

 private:
  struct NrmOut {
    Tensor estimate;  // [B,1,T,F]
    Tensor state;
    Shape bottleneck_shape;
  };

  std::vector<Tensor> agm_forward(const Tensor& x2, bool train);
  NrmOut nrm_forward(const Tensor& x2, const std::vector<Tensor>& gates, const Tensor& state,
                     bool train);

  ArchConfig cfg_;
  std::vector<Conv2d> agm_enc_;
  std::vector<BatchNorm2d> agm_enc_bn_;
  std::vector<Deconv2d> agm_dec_;
  std::vector<BatchNorm2d> agm_dec_bn_;
  std::vector<Conv2d> heads_;  // pointwise gate generators, bottleneck first

  Conv2d srnn_conv_;
  BatchNorm2d srnn_bn_;
  ConvGruCell gru_;
  std::vector<Conv2d> nrm_enc_;
  std::vector<BatchNorm2d> nrm_enc_bn_;
  std::vector<GluBlock> glus_;
  std::vector<Deconv2d> nrm_dec_;
  std::vector<BatchNorm2d> nrm_dec_bn_;
  std::vector<AttentionGate> ags_;
  Conv2d out_conv_;
};

// Architecture and weights reconstructed from a checkpoint's recorded config.
struct LoadedModel {
  ArchConfig arch;
  std::unique_ptr<DarcnModel> model;
};
LoadedModel load_model_checkpoint(const std::string& path);

// One utterance through the analysis transform, the model, and synthesis with
// the noisy phase; output is trimmed to the input length.
std::vector<double> enhance_samples(DarcnModel& model, const std::vector<double>& x);

}  // namespace darcn
