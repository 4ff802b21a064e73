#pragma once

// Class id <-> name tables and the named label subsets evaluated on the
// different test cohorts.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wbseg {

struct ClassInfo {
  std::uint32_t id = 0;
  std::string name;
};

class ClassTaxonomy {
 public:
  // Ids must be unique and nonzero.
  ClassTaxonomy(std::string name, std::vector<ClassInfo> classes);

  const std::string& name() const { return name_; }
  const std::vector<ClassInfo>& classes() const { return classes_; }
  std::size_t size() const { return classes_.size(); }
  bool contains(std::uint32_t id) const;
  // Throws ArgumentError for unknown ids.
  const std::string& name_of(std::uint32_t id) const;
  std::vector<std::uint32_t> ids() const;

  // Subsets must be drawn from the taxonomy; ids are stored sorted.
  void add_subset(std::string subset_name, std::vector<std::uint32_t> ids);
  bool has_subset(std::string_view subset_name) const;
  std::span<const std::uint32_t> subset(std::string_view subset_name) const;
  std::vector<std::string> subset_names() const;

 private:
  std::string name_;
  std::vector<ClassInfo> classes_;
  std::map<std::uint32_t, std::size_t> by_id_;
  std::map<std::string, std::vector<std::uint32_t>, std::less<>> subsets_;
};

// 40-class whole-body MR/CT roster. Subsets: "full40", "subset24_t2"
// (structures inside the T2 HASTE field of view), "subset13_amos" (AMOS
// abdominal organs without prostate and bladder) and "vessels".
const ClassTaxonomy& body40();

// TotalSegmentator v2 "total" task, 117 classes.
const ClassTaxonomy& totalseg117();

// Looks up "body40" or "totalseg117"; throws ArgumentError otherwise.
const ClassTaxonomy& taxonomy_by_name(std::string_view name);

}  // namespace wbseg
