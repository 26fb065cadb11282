#include "qsmpad/dataset.hpp"

#include <filesystem>
#include <fstream>

#include "qsmpad/dipole.hpp"
#include "qsmpad/parallel.hpp"
#include "qsmpad/volume_io.hpp"

namespace fs = std::filesystem;

namespace qsmpad {

std::vector<QsmSample> synthesize_dataset(const PhantomConfig& config, int n, const GridMeta& meta,
                                          std::uint64_t seed) {
    if (n < 1) throw ValidationError("synthesize_dataset: n must be >= 1");
    config.validate();
    if (!(config.base_chi.meta == meta))
        throw ValidationError("synthesize_dataset: base phantom grid differs from requested grid");

    const DipoleKernel kernel = dipole_kernel(meta);
    std::vector<QsmSample> out(n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        PhantomSample ph = generate_phantom(config, seed + i);
        Volume3D total_src = ph.chi;
        for (std::size_t v = 0; v < total_src.data.size(); ++v)
            total_src.data[v] += ph.chi_background.data[v];
        QsmSample s;
        s.local_field = forward_field(ph.chi, kernel);
        s.total_field = forward_field(total_src, kernel);
        s.chi = std::move(ph.chi);
        s.brain_mask = std::move(ph.brain_mask);
        out[i] = std::move(s);
    });
    return out;
}

void write_dataset(const std::string& dir, const std::vector<QsmSample>& samples,
                   std::uint64_t seed, std::uint64_t config_digest) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create dataset directory: " + dir);

    for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::string sdir = dir + "/sample_" + std::to_string(i);
        fs::create_directories(sdir, ec);
        if (ec) throw IoError("cannot create sample directory: " + sdir);
        save_volume(samples[i].chi, sdir + "/chi.qsmv");
        save_volume(samples[i].local_field, sdir + "/local.qsmv");
        save_volume(samples[i].total_field, sdir + "/total.qsmv");
        save_mask(samples[i].brain_mask, sdir + "/mask.qsmm");
    }

    std::ofstream manifest(dir + "/manifest", std::ios::trunc);
    if (!manifest) throw IoError("cannot write manifest in " + dir);
    manifest << "n = " << samples.size() << "\n";
    manifest << "seed = " << seed << "\n";
    manifest << "config_digest = " << config_digest << "\n";
    for (std::size_t i = 0; i < samples.size(); ++i)
        manifest << "sample_" << i << "_seed = " << (seed + i) << "\n";
    if (!manifest) throw IoError("manifest write failed in " + dir);
}

int dataset_sample_count(const std::string& dir) {
    std::ifstream manifest(dir + "/manifest");
    if (!manifest) throw IoError("missing dataset manifest in " + dir);
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.rfind("n = ", 0) == 0) return std::stoi(line.substr(4));
    }
    throw FormatError("dataset manifest in " + dir + " lacks an 'n =' line");
}

std::vector<QsmSample> load_dataset(const std::string& dir) {
    const int n = dataset_sample_count(dir);
    std::vector<QsmSample> out(n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        const std::string sdir = dir + "/sample_" + std::to_string(i);
        QsmSample s;
        s.chi = load_volume(sdir + "/chi.qsmv");
        s.local_field = load_volume(sdir + "/local.qsmv");
        s.total_field = load_volume(sdir + "/total.qsmv");
        s.brain_mask = load_mask(sdir + "/mask.qsmm");
        out[i] = std::move(s);
    });
    return out;
}

} // namespace qsmpad
