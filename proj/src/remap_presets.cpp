#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "wbseg/error.hpp"
#include "wbseg/preprocess.hpp"

namespace wbseg {

namespace {

constexpr std::string_view kTotalseg117To40 = R"(# TotalSegmentator v2 (117 classes) to the 40-class body roster.
# Vertebrae and lung lobes merge into common classes; structures outside
# the roster become background. Flagged sources have no destination that
# follows from the roster alone: kidney cysts (23, 24), vertebra S1 (26),
# left atrial appendage (61) and spinal cord (79).
source = totalseg117
target = body40
unmapped = to-background
flagged = 23, 24, 26, 61, 79
1 = 1  # spleen
2 = 2  # kidney_right
3 = 3  # kidney_left
4 = 4  # gallbladder
5 = 5  # liver
6 = 6  # stomach
7 = 7  # pancreas
8 = 8  # adrenal_gland_right
9 = 9  # adrenal_gland_left
10 = 10  # lung_upper_lobe_left
11 = 10  # lung_lower_lobe_left
12 = 11  # lung_upper_lobe_right
13 = 11  # lung_middle_lobe_right
14 = 11  # lung_lower_lobe_right
15 = 20  # esophagus
18 = 21  # small_bowel
19 = 22  # duodenum
20 = 23  # colon
21 = 24  # urinary_bladder
25 = 26  # sacrum
26 = 25  # vertebrae_S1
27 = 25  # vertebrae_L5
28 = 25  # vertebrae_L4
29 = 25  # vertebrae_L3
30 = 25  # vertebrae_L2
31 = 25  # vertebrae_L1
32 = 25  # vertebrae_T12
33 = 25  # vertebrae_T11
34 = 25  # vertebrae_T10
35 = 25  # vertebrae_T9
36 = 25  # vertebrae_T8
37 = 25  # vertebrae_T7
38 = 25  # vertebrae_T6
39 = 25  # vertebrae_T5
40 = 25  # vertebrae_T4
41 = 25  # vertebrae_T3
42 = 25  # vertebrae_T2
43 = 25  # vertebrae_T1
44 = 25  # vertebrae_C7
45 = 25  # vertebrae_C6
46 = 25  # vertebrae_C5
47 = 25  # vertebrae_C4
48 = 25  # vertebrae_C3
49 = 25  # vertebrae_C2
50 = 25  # vertebrae_C1
51 = 12  # heart
52 = 13  # aorta
63 = 14  # inferior_vena_cava
64 = 15  # portal_vein_and_splenic_vein
65 = 16  # iliac_artery_left
66 = 17  # iliac_artery_right
67 = 18  # iliac_vena_left
68 = 19  # iliac_vena_right
75 = 29  # femur_left
76 = 30  # femur_right
77 = 27  # hip_left
78 = 28  # hip_right
80 = 35  # gluteus_maximus_left
81 = 36  # gluteus_maximus_right
82 = 37  # gluteus_medius_left
83 = 38  # gluteus_medius_right
84 = 39  # gluteus_minimus_left
85 = 40  # gluteus_minimus_right
86 = 31  # autochthon_left
87 = 32  # autochthon_right
88 = 33  # iliopsoas_left
89 = 34  # iliopsoas_right
)";

constexpr std::string_view kFull40 = R"(# Identity over the 40-class roster.
source = body40
target = body40
unmapped = error
1 = 1
2 = 2
3 = 3
4 = 4
5 = 5
6 = 6
7 = 7
8 = 8
9 = 9
10 = 10
11 = 11
12 = 12
13 = 13
14 = 14
15 = 15
16 = 16
17 = 17
18 = 18
19 = 19
20 = 20
21 = 21
22 = 22
23 = 23
24 = 24
25 = 25
26 = 26
27 = 27
28 = 28
29 = 29
30 = 30
31 = 31
32 = 32
33 = 33
34 = 34
35 = 35
36 = 36
37 = 37
38 = 38
39 = 39
40 = 40
)";

constexpr std::string_view kSubset24T2 = R"(# Classes inside the T2 HASTE field of view (lungs to sacrum); others become background.
source = body40
target = body40
unmapped = to-background
1 = 1
2 = 2
3 = 3
4 = 4
5 = 5
6 = 6
7 = 7
8 = 8
9 = 9
10 = 10
11 = 11
12 = 12
13 = 13
14 = 14
15 = 15
20 = 20
21 = 21
22 = 22
23 = 23
25 = 25
31 = 31
32 = 32
33 = 33
34 = 34
)";

constexpr std::string_view kSubset13Amos = R"(# AMOS abdominal classes without prostate and bladder; others become background.
source = body40
target = body40
unmapped = to-background
1 = 1
2 = 2
3 = 3
4 = 4
5 = 5
6 = 6
7 = 7
8 = 8
9 = 9
13 = 13
14 = 14
20 = 20
22 = 22
)";

struct Preset {
  std::string_view name;
  std::string_view text;
};

constexpr std::array<Preset, 4> kPresets{{
    {"totalseg117_to_40", kTotalseg117To40},
    {"full40", kFull40},
    {"subset24_t2", kSubset24T2},
    {"subset13_amos", kSubset13Amos},
}};

}  // namespace

std::string_view RemapTable::preset_text(std::string_view name) {
  for (const auto& p : kPresets) {
    if (p.name == name) return p.text;
  }
  throw ArgumentError(fmt::format("unknown remap preset '{}'", name));
}

std::vector<std::string> RemapTable::preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) out.emplace_back(p.name);
  return out;
}

}  // namespace wbseg
