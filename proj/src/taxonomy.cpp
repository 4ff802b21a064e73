#include "wbseg/taxonomy.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "wbseg/error.hpp"

namespace wbseg {

ClassTaxonomy::ClassTaxonomy(std::string name, std::vector<ClassInfo> classes)
    : name_(std::move(name)), classes_(std::move(classes)) {
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    const auto id = classes_[i].id;
    if (id == 0) throw ArgumentError(fmt::format("taxonomy {}: class id 0 is reserved for background", name_));
    if (!by_id_.emplace(id, i).second) {
      throw ArgumentError(fmt::format("taxonomy {}: duplicate class id {}", name_, id));
    }
  }
}

bool ClassTaxonomy::contains(std::uint32_t id) const { return by_id_.count(id) != 0; }

const std::string& ClassTaxonomy::name_of(std::uint32_t id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) throw ArgumentError(fmt::format("taxonomy {} has no class {}", name_, id));
  return classes_[it->second].name;
}

std::vector<std::uint32_t> ClassTaxonomy::ids() const {
  std::vector<std::uint32_t> out;
  out.reserve(by_id_.size());
  for (const auto& [id, _] : by_id_) out.push_back(id);
  return out;
}

void ClassTaxonomy::add_subset(std::string subset_name, std::vector<std::uint32_t> ids) {
  for (auto id : ids) {
    if (!contains(id)) {
      throw ArgumentError(fmt::format("subset {} names class {} which is not in taxonomy {}", subset_name, id, name_));
    }
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  subsets_[std::move(subset_name)] = std::move(ids);
}

bool ClassTaxonomy::has_subset(std::string_view subset_name) const {
  return subsets_.find(subset_name) != subsets_.end();
}

std::span<const std::uint32_t> ClassTaxonomy::subset(std::string_view subset_name) const {
  const auto it = subsets_.find(subset_name);
  if (it == subsets_.end()) {
    throw ArgumentError(fmt::format("taxonomy {} has no subset '{}'", name_, subset_name));
  }
  return it->second;
}

std::vector<std::string> ClassTaxonomy::subset_names() const {
  std::vector<std::string> out;
  for (const auto& [n, _] : subsets_) out.push_back(n);
  return out;
}

namespace {

ClassTaxonomy make_body40() {
  ClassTaxonomy t("body40", {
                                {1, "spleen"},
                                {2, "right_kidney"},
                                {3, "left_kidney"},
                                {4, "gallbladder"},
                                {5, "liver"},
                                {6, "stomach"},
                                {7, "pancreas"},
                                {8, "right_adrenal_gland"},
                                {9, "left_adrenal_gland"},
                                {10, "left_lung"},
                                {11, "right_lung"},
                                {12, "heart"},
                                {13, "aorta"},
                                {14, "inferior_vena_cava"},
                                {15, "portal_vein_and_splenic_vein"},
                                {16, "left_iliac_artery"},
                                {17, "right_iliac_artery"},
                                {18, "left_iliac_vena"},
                                {19, "right_iliac_vena"},
                                {20, "esophagus"},
                                {21, "small_bowel"},
                                {22, "duodenum"},
                                {23, "colon"},
                                {24, "urinary_bladder"},
                                {25, "spine"},
                                {26, "sacrum"},
                                {27, "left_hip"},
                                {28, "right_hip"},
                                {29, "left_femur"},
                                {30, "right_femur"},
                                {31, "left_autochthonous_muscle"},
                                {32, "right_autochthonous_muscle"},
                                {33, "left_iliopsoas_muscle"},
                                {34, "right_iliopsoas_muscle"},
                                {35, "left_gluteus_maximus"},
                                {36, "right_gluteus_maximus"},
                                {37, "left_gluteus_medius"},
                                {38, "right_gluteus_medius"},
                                {39, "left_gluteus_minimus"},
                                {40, "right_gluteus_minimus"},
                            });
  t.add_subset("full40", t.ids());
  // Structures fully inside the lung-to-sacrum HASTE field of view.
  t.add_subset("subset24_t2", {10, 11, 12, 20, 5, 1, 7, 4, 6, 22, 21, 23, 3, 2, 9, 8, 25, 31, 32, 33,
                               34, 13, 14, 15});
  // AMOS organs minus prostate (not a target class) and bladder.
  t.add_subset("subset13_amos", {20, 5, 1, 7, 4, 6, 22, 3, 2, 9, 8, 13, 14});
  t.add_subset("vessels", {13, 14, 15, 16, 17, 18, 19});
  return t;
}

ClassTaxonomy make_totalseg117() {
  std::vector<ClassInfo> c = {
      {1, "spleen"},
      {2, "kidney_right"},
      {3, "kidney_left"},
      {4, "gallbladder"},
      {5, "liver"},
      {6, "stomach"},
      {7, "pancreas"},
      {8, "adrenal_gland_right"},
      {9, "adrenal_gland_left"},
      {10, "lung_upper_lobe_left"},
      {11, "lung_lower_lobe_left"},
      {12, "lung_upper_lobe_right"},
      {13, "lung_middle_lobe_right"},
      {14, "lung_lower_lobe_right"},
      {15, "esophagus"},
      {16, "trachea"},
      {17, "thyroid_gland"},
      {18, "small_bowel"},
      {19, "duodenum"},
      {20, "colon"},
      {21, "urinary_bladder"},
      {22, "prostate"},
      {23, "kidney_cyst_left"},
      {24, "kidney_cyst_right"},
      {25, "sacrum"},
      {26, "vertebrae_S1"},
      {27, "vertebrae_L5"},
      {28, "vertebrae_L4"},
      {29, "vertebrae_L3"},
      {30, "vertebrae_L2"},
      {31, "vertebrae_L1"},
      {32, "vertebrae_T12"},
      {33, "vertebrae_T11"},
      {34, "vertebrae_T10"},
      {35, "vertebrae_T9"},
      {36, "vertebrae_T8"},
      {37, "vertebrae_T7"},
      {38, "vertebrae_T6"},
      {39, "vertebrae_T5"},
      {40, "vertebrae_T4"},
      {41, "vertebrae_T3"},
      {42, "vertebrae_T2"},
      {43, "vertebrae_T1"},
      {44, "vertebrae_C7"},
      {45, "vertebrae_C6"},
      {46, "vertebrae_C5"},
      {47, "vertebrae_C4"},
      {48, "vertebrae_C3"},
      {49, "vertebrae_C2"},
      {50, "vertebrae_C1"},
      {51, "heart"},
      {52, "aorta"},
      {53, "pulmonary_vein"},
      {54, "brachiocephalic_trunk"},
      {55, "subclavian_artery_right"},
      {56, "subclavian_artery_left"},
      {57, "common_carotid_artery_right"},
      {58, "common_carotid_artery_left"},
      {59, "brachiocephalic_vein_left"},
      {60, "brachiocephalic_vein_right"},
      {61, "atrial_appendage_left"},
      {62, "superior_vena_cava"},
      {63, "inferior_vena_cava"},
      {64, "portal_vein_and_splenic_vein"},
      {65, "iliac_artery_left"},
      {66, "iliac_artery_right"},
      {67, "iliac_vena_left"},
      {68, "iliac_vena_right"},
      {69, "humerus_left"},
      {70, "humerus_right"},
      {71, "scapula_left"},
      {72, "scapula_right"},
      {73, "clavicula_left"},
      {74, "clavicula_right"},
      {75, "femur_left"},
      {76, "femur_right"},
      {77, "hip_left"},
      {78, "hip_right"},
      {79, "spinal_cord"},
      {80, "gluteus_maximus_left"},
      {81, "gluteus_maximus_right"},
      {82, "gluteus_medius_left"},
      {83, "gluteus_medius_right"},
      {84, "gluteus_minimus_left"},
      {85, "gluteus_minimus_right"},
      {86, "autochthon_left"},
      {87, "autochthon_right"},
      {88, "iliopsoas_left"},
      {89, "iliopsoas_right"},
      {90, "brain"},
      {91, "skull"},
  };
  for (std::uint32_t r = 1; r <= 12; ++r) c.push_back({91 + r, fmt::format("rib_left_{}", r)});
  for (std::uint32_t r = 1; r <= 12; ++r) c.push_back({103 + r, fmt::format("rib_right_{}", r)});
  c.push_back({116, "sternum"});
  c.push_back({117, "costal_cartilages"});
  return ClassTaxonomy("totalseg117", std::move(c));
}

}  // namespace

const ClassTaxonomy& body40() {
  static const ClassTaxonomy t = make_body40();
  return t;
}

const ClassTaxonomy& totalseg117() {
  static const ClassTaxonomy t = make_totalseg117();
  return t;
}

const ClassTaxonomy& taxonomy_by_name(std::string_view name) {
  if (name == "body40") return body40();
  if (name == "totalseg117") return totalseg117();
  throw ArgumentError(fmt::format("unknown taxonomy '{}'", name));
}

}  // namespace wbseg
