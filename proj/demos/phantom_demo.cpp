// Writes a brain phantom and one pathological variant per pathology.
//
//   phantom_demo OUT_DIR [SEED]

#include <filesystem>
#include <iostream>
#include <string>

#include "fnsynth/io/nifti.hpp"
#include "fnsynth/pathology/synthesis.hpp"
#include "fnsynth/phantom.hpp"

using namespace fnsynth;
using pathology::Pathology;

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: phantom_demo OUT_DIR [SEED]\n";
        return 2;
    }
    const std::filesystem::path out = argv[1];
    const std::uint64_t seed = argc > 2 ? std::stoull(argv[2]) : 7;
    std::filesystem::create_directories(out);

    const LabelVolume healthy = phantom::fetal_brain(96, seed);
    io::write_volume(healthy, (out / "healthy_dseg.nii.gz").string());
    io::write_volume(phantom::fetal_image(healthy, seed), (out / "healthy_T2w.nii.gz").string());

    const std::pair<const char*, std::vector<Pathology>> cases[] = {
        {"vm", {Pathology::Ventriculomegaly}},
        {"ch", {Pathology::CerebellarHypoplasia}},
        {"pch", {Pathology::PontocerebellarHypoplasia}},
        {"mc", {Pathology::Microcephaly, Pathology::Ventriculomegaly}},
    };
    for (const auto& [name, list] : cases) {
        const auto plan = pathology::make_plan(list, 1.0);
        auto [labels, report] = pathology::apply_plan(healthy, plan);
        io::write_volume(labels, (out / (std::string(name) + "_dseg.nii.gz")).string());
        std::cout << name << ": " << report.to_json().dump() << "\n";
    }

    const auto sampled = pathology::sample_plan(seed);
    auto [labels, report] = pathology::apply_plan(healthy, sampled);
    io::write_volume(labels, (out / "sampled_dseg.nii.gz").string());
    std::cout << "sampled plan: " << sampled.to_json().dump() << "\n";
}
