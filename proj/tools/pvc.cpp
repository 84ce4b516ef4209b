// pvc: command-line front end for partial-volume correction of CT bone
// surfaces, phantom validation runs and FE material tables.
//
// Exit codes: 0 success, 1 processing error, 2 usage error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pvc/pvc.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitProcessing = 1;
constexpr int kExitUsage = 2;

/// A volume plus what is needed to write a result back in the same format.
struct LoadedVolume {
    pvc::ScalarVolume volume;
    std::optional<pvc::DicomSeriesRef> series;  // set for DICOM inputs
    pvc::ElementType element = pvc::ElementType::float64;
};

LoadedVolume load_volume(const std::string& path) {
    if (fs::is_directory(path)) {
        auto ref = pvc::scan_dicom_series(path);
        auto vol = pvc::read_dicom_series(ref);
        return {std::move(vol), std::move(ref), pvc::ElementType::int16};
    }
    auto img = pvc::read_raw(path);
    return {std::move(img.volume), std::nullopt, img.header.element};
}

pvc::BinaryMask load_mask(const std::string& path) {
    if (fs::is_directory(path)) return pvc::read_dicom_mask(pvc::scan_dicom_series(path));
    return pvc::read_raw_mask(path);
}

void save_volume(const pvc::ScalarVolume& v, const LoadedVolume& like, const std::string& out) {
    if (like.series) {
        pvc::write_dicom_series(v, *like.series, out);
    } else {
        pvc::write_raw(v, out, like.element);
    }
}

std::string vec3(const pvc::Vec3& v) {
    std::ostringstream os;
    os << std::setprecision(10) << v[0] << ' ' << v[1] << ' ' << v[2];
    return os.str();
}

void append_record(const std::string& path, const ordered_json& record) {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::app);
    if (!out) throw pvc::Error("cannot open record file '" + path + "'");
    out << record.dump() << '\n';
}

// ---------------------------------------------------------------- correct

struct CorrectOptions {
    std::string input, mask, output, record;
    double power = 2.0;
    unsigned workers = 0;
};

int cmd_correct(const CorrectOptions& o) {
    const LoadedVolume in = load_volume(o.input);
    const pvc::BinaryMask mask = load_mask(o.mask);
    const pvc::PvcParams params{o.power};
    const auto result = pvc::correct(in.volume, mask, params, o.workers);
    save_volume(result.volume, in, o.output);

    const auto& r = result.report;
    std::cout << "surface voxels      " << r.surface_count << '\n'
              << "interior voxels     " << r.interior_count << '\n'
              << "raised              " << r.raised_count << '\n'
              << "unchanged           " << r.unchanged_count << '\n'
              << "uncorrectable       " << r.uncorrectable_count << '\n'
              << "mean delta (HU)     " << r.mean_delta << '\n'
              << "max delta (HU)      " << r.max_delta << '\n';
    ordered_json rec{{"command", "correct"},
                     {"input", o.input},
                     {"mask", o.mask},
                     {"output", o.output},
                     {"power", o.power},
                     {"surface_count", r.surface_count},
                     {"interior_count", r.interior_count},
                     {"raised_count", r.raised_count},
                     {"unchanged_count", r.unchanged_count},
                     {"uncorrectable_count", r.uncorrectable_count},
                     {"mean_delta", r.mean_delta},
                     {"max_delta", r.max_delta}};
    std::cout << rec.dump() << '\n';
    append_record(o.record, rec);
    return kExitOk;
}

// ---------------------------------------------------------------- phantom

struct PhantomOptions {
    std::string suite, output;
    double power = 2.0;
    unsigned workers = 0;
};

int cmd_phantom(const PhantomOptions& o) {
    const auto cases = pvc::load_phantom_suite(o.suite);
    std::ofstream file;
    if (!o.output.empty()) {
        file.open(o.output, std::ios::trunc);
        if (!file) throw pvc::Error("cannot open '" + o.output + "' for writing");
    }
    std::ostream& csv = o.output.empty() ? std::cout : file;
    pvc::write_phantom_csv_header(csv);

    bool all_improved = true;
    for (const auto& c : cases) {
        pvc::PhantomResult r;
        try {
            r = pvc::run_phantom(c.spec, {o.power}, o.workers).result;
        } catch (const pvc::Error& e) {
            throw pvc::Error("case '" + c.name + "': " + e.what());
        }
        pvc::write_phantom_csv_row(csv, c.name, r);
        if (!r.improvement_defined)
            std::cerr << "warning: case '" << c.name
                      << "': uncorrected surface error is zero, improvement reported as 1 by convention\n";
        if (!(r.improvement_fraction > 0.0)) {
            all_improved = false;
            std::cerr << "case '" << c.name << "': correction did not reduce surface error (improvement "
                      << r.improvement_fraction << ")\n";
        }
    }
    return all_improved ? kExitOk : kExitProcessing;
}

// ---------------------------------------------------------------- material

struct MaterialOptions {
    std::string input, mask, output;
    pvc::CalibrationCurve calibration;
    pvc::DensityModulusLaw law;
    double threshold_density = 0.0;
};

int cmd_material(const MaterialOptions& o) {
    o.calibration.validate();
    o.law.validate();
    const LoadedVolume in = load_volume(o.input);
    const pvc::BinaryMask mask = load_mask(o.mask);
    pvc::require_aligned(in.volume.geometry(), mask.geometry(), "material: mask does not match volume");

    std::vector<pvc::MaterialSample> samples;
    std::size_t clamped = 0;
    for (std::size_t p = 0; p < mask.size(); ++p) {
        if (!mask.test(p)) continue;
        double rho = pvc::hu_to_density(in.volume[p], o.calibration);
        if (rho < 0.0) {
            rho = 0.0;
            ++clamped;
        }
        samples.push_back({rho, pvc::density_to_modulus(rho, o.law)});
    }
    if (samples.empty()) throw pvc::Error("material: mask selects no voxels");
    const auto bins = pvc::build_bins(samples, o.threshold_density);

    std::ofstream file;
    if (!o.output.empty()) {
        file.open(o.output, std::ios::trunc);
        if (!file) throw pvc::Error("cannot open '" + o.output + "' for writing");
    }
    pvc::write_material_table(o.output.empty() ? std::cout : file, bins);
    std::ostream& info = o.output.empty() ? std::cerr : std::cout;

    if (clamped)
        std::cerr << "warning: " << clamped << " voxel(s) calibrated to negative density were set to 0 g/cm3\n";
    for (auto cls : {pvc::BoneClass::trabecular, pvc::BoneClass::cortical})
        if (!bins.classes(cls))
            std::cerr << "warning: no " << pvc::to_string(cls) << " voxels at threshold " << o.threshold_density
                      << " g/cm3; no bins emitted for that class\n";

    const auto count = [&](pvc::BoneClass c) {
        std::size_t n = 0;
        for (const auto& a : bins.assignments) n += a.bone_class == c;
        return n;
    };
    ordered_json rec{{"command", "material"},
                     {"input", o.input},
                     {"mask", o.mask},
                     {"voxels", samples.size()},
                     {"trabecular_voxels", count(pvc::BoneClass::trabecular)},
                     {"cortical_voxels", count(pvc::BoneClass::cortical)},
                     {"negative_density_clamped", clamped},
                     {"bins", bins.total_bins()},
                     {"poisson", bins.poisson}};
    info << rec.dump() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- info

int cmd_info(const std::string& input) {
    const LoadedVolume in = load_volume(input);
    const auto& g = in.volume.geometry();
    const auto values = in.volume.values();
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    std::cout << "format       " << (in.series ? "dicom" : "raw") << '\n'
              << "element      " << pvc::to_string(in.element) << '\n'
              << "dims         " << g.nx() << ' ' << g.ny() << ' ' << g.nz() << '\n'
              << "spacing_mm   " << vec3(g.spacing()) << '\n'
              << "origin_mm    " << vec3(g.origin()) << '\n'
              << "axis_x       " << vec3(g.axes()[0]) << '\n'
              << "axis_y       " << vec3(g.axes()[1]) << '\n'
              << "axis_z       " << vec3(g.axes()[2]) << '\n'
              << "rescale      " << in.volume.rescale().slope << ' ' << in.volume.rescale().intercept << '\n'
              << "hu_range     " << *lo << ' ' << *hi << '\n';
    for (const auto& [k, v] : in.volume.metadata()) std::cout << "meta         " << k << " = " << v << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Partial-volume correction of cortical bone surfaces in CT volumes"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI/TOML file; command-line flags take precedence");

    CorrectOptions co;
    auto* correct = app.add_subcommand("correct", "Correct surface voxels of a CT volume given a bone mask");
    correct->add_option("--input", co.input, "CT volume: raw file or DICOM series directory")
        ->required()
        ->check(CLI::ExistingPath);
    correct->add_option("--mask", co.mask, "Bone mask: raw file or DICOM series directory")
        ->required()
        ->check(CLI::ExistingPath);
    correct->add_option("--output", co.output, "Output raw file, or directory for DICOM inputs")->required();
    correct->add_option("--power", co.power, "Inverse-distance weighting exponent")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    correct->add_option("--workers", co.workers, "Worker threads (0 = all cores)")->capture_default_str();
    correct->add_option("--record", co.record, "Append the JSON run record to this file");

    PhantomOptions po;
    auto* phantom = app.add_subcommand("phantom", "Run a synthetic phantom suite and report surface errors as CSV");
    phantom->add_option("--suite", po.suite, "Phantom suite file")->required()->check(CLI::ExistingFile);
    phantom->add_option("--output", po.output, "CSV output file (default: stdout)");
    phantom->add_option("--power", po.power, "Inverse-distance weighting exponent")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    phantom->add_option("--workers", po.workers, "Worker threads (0 = all cores)")->capture_default_str();

    MaterialOptions mo;
    auto* material = app.add_subcommand("material", "Emit a binned FE material table for the masked voxels");
    material->add_option("--input", mo.input, "CT volume: raw file or DICOM series directory")
        ->required()
        ->check(CLI::ExistingPath);
    material->add_option("--mask", mo.mask, "Bone mask: raw file or DICOM series directory")
        ->required()
        ->check(CLI::ExistingPath);
    material->add_option("--calibration-slope", mo.calibration.slope, "Density per HU (g/cm3/HU)")->required();
    material->add_option("--calibration-intercept", mo.calibration.intercept, "Density at 0 HU (g/cm3)")
        ->required();
    material->add_option("--law-a", mo.law.a, "Power-law coefficient A (MPa)")->required();
    material->add_option("--law-b", mo.law.b, "Power-law exponent B")->required();
    material->add_option("--e-max", mo.law.e_max, "Modulus cap (MPa)")->capture_default_str();
    material->add_option("--threshold-density", mo.threshold_density,
                         "Density (g/cm3) at or above which voxels are cortical")
        ->required();
    material->add_option("--output", mo.output, "Table output file (default: stdout)");

    std::string info_input;
    auto* info = app.add_subcommand("info", "Print geometry and header of a volume");
    info->add_option("--input", info_input, "Raw file or DICOM series directory")
        ->required()
        ->check(CLI::ExistingPath);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*correct) return cmd_correct(co);
        if (*phantom) return cmd_phantom(po);
        if (*material) return cmd_material(mo);
        if (*info) return cmd_info(info_input);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitProcessing;
    }
    return kExitUsage;
}
