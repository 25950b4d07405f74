#include "adacon/losses.hpp"

namespace adacon {

LossKind parse_loss_kind(std::string_view name) {
  if (name == "adacon") return LossKind::AdaCon;
  if (name == "supcon") return LossKind::SupCon;
  if (name == "npair") return LossKind::NPair;
  if (name == "triplet") return LossKind::Triplet;
  if (name == "l1") return LossKind::L1;
  if (name == "mse") return LossKind::MSE;
  if (name == "huber") return LossKind::Huber;
  if (name == "none") return LossKind::None;
  throw Error("unknown loss kind: " + std::string(name));
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::AdaCon: return "adacon";
    case LossKind::SupCon: return "supcon";
    case LossKind::NPair: return "npair";
    case LossKind::Triplet: return "triplet";
    case LossKind::L1: return "l1";
    case LossKind::MSE: return "mse";
    case LossKind::Huber: return "huber";
    case LossKind::None: return "none";
  }
  return "none";
}

bool is_contrastive(LossKind kind) {
  return kind == LossKind::AdaCon || kind == LossKind::SupCon || kind == LossKind::NPair ||
         kind == LossKind::Triplet;
}

bool is_regression(LossKind kind) {
  return kind == LossKind::L1 || kind == LossKind::MSE || kind == LossKind::Huber;
}

RegressionKind to_regression_kind(LossKind kind) {
  switch (kind) {
    case LossKind::L1: return RegressionKind::L1;
    case LossKind::MSE: return RegressionKind::MSE;
    case LossKind::Huber: return RegressionKind::Huber;
    default: throw Error("not a regression loss: " + to_string(kind));
  }
}

}  // namespace adacon
