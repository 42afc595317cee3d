// vcauth: random-grid visual secret sharing with share authentication.
//
// Subcommands:
//   split     secret image -> n share files + digest manifest
//   stack     superimpose share files (pixelwise OR)
//   analyze   transmission report of a reconstruction against its secret
//   attack    craft fake grids against a victim share (the collusion attack)
//   simulate  run a built-in protocol scenario and print the transcript
//
// Exit codes: 0 success (or the scenario's expected outcome), 1 data
// errors, 2 usage errors.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcauth/vcauth.hpp"

namespace fs = std::filesystem;
using namespace vcauth;

namespace {

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Bytes data((std::istreambuf_iterator<char>(in)),
             std::istreambuf_iterator<char>());
  if (in.bad()) throw std::runtime_error("cannot read " + path.string());
  return data;
}

void write_file(const fs::path& path, const Bytes& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() +
                                     " for writing");
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

struct RandomChoice {
  std::optional<std::uint64_t> seed;
  bool secure = false;

  // no flag at all: draw a fresh seed so the run is reproducible after
  // the fact, but not predictable in advance
  RandomSource make() const {
    if (secure) return RandomSource::secure();
    if (seed) return RandomSource::seeded(*seed);
    std::array<std::uint8_t, 8> raw{};
    crypto::random_bytes(raw);
    std::uint64_t fresh = 0;
    for (std::uint8_t b : raw) fresh = (fresh << 8) | b;
    return RandomSource::seeded(fresh);
  }
};

void add_random_flags(CLI::App* cmd, RandomChoice& choice) {
  auto* seed = cmd->add_option("--seed", choice.seed,
                               "64-bit seed for reproducible randomness");
  auto* secure = cmd->add_flag("--secure-random", choice.secure,
                               "use the OS CSPRNG; no seed is recorded");
  seed->excludes(secure);
  secure->excludes(seed);
}

BinaryImage load_secret_image(const fs::path& path, int threshold) {
  Bytes data = read_file(path);
  if (data.size() >= 2 && data[0] == 'P' &&
      (data[1] == '2' || data[1] == '5'))
    return binarize(load_pgm(data), threshold);
  return load_pbm(data).image;
}

RegionMask mask_from_image(const BinaryImage& img) {
  RegionMask mask(img.width(), img.height());
  for (std::uint32_t r = 0; r < img.height(); ++r)
    for (std::uint32_t c = 0; c < img.width(); ++c)
      mask.set(r, c, img.get(r, c) == 1);
  return mask;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// ---------------------------------------------------------------------------

struct SplitOptions {
  std::string input;
  std::string scheme = "2n";
  std::uint32_t n = 0;
  std::string out_dir = ".";
  std::string format = "p4";
  int threshold = 128;
  RandomChoice random;
};

int cmd_split(const SplitOptions& opt) {
  BinaryImage secret = load_secret_image(opt.input, opt.threshold);
  SchemeKind kind = *parse_scheme_kind(opt.scheme);
  RandomSource rng = opt.random.make();
  ShareSet set = kind == SchemeKind::TwoOfN
                     ? split_2n(secret, opt.n, rng)
                     : split_chain_nn(secret, opt.n, rng);
  PbmFormat format = opt.format == "p1" ? PbmFormat::P1 : PbmFormat::P4;

  fs::create_directories(opt.out_dir);
  nlohmann::json manifest;
  manifest["scheme"] = to_string(kind);
  manifest["n"] = set.params.n;
  manifest["k"] = set.params.k;
  manifest["width"] = set.params.width;
  manifest["height"] = set.params.height;
  manifest["format"] = opt.format;
  if (set.seed) manifest["seed"] = *set.seed;
  manifest["shares"] = nlohmann::json::array();

  for (std::uint32_t i = 1; i <= set.params.n; ++i) {
    std::string name = "share_" + std::to_string(i) + ".pbm";
    fs::path path = fs::path(opt.out_dir) / name;
    MetaList meta = share_metadata(set, i, !opt.random.secure);
    write_file(path, save_pbm(set.share(i), format, meta));
    crypto::Digest digest = crypto::sha256(canonical_p4(set.share(i)));
    manifest["shares"].push_back({{"index", i},
                                  {"file", name},
                                  {"sha256", crypto::to_hex(digest)}});
    std::cout << "wrote " << path.string() << "\n";
  }
  fs::path manifest_path = fs::path(opt.out_dir) / "manifest.json";
  std::string text = manifest.dump(2) + "\n";
  write_file(manifest_path, Bytes(text.begin(), text.end()));
  std::cout << "wrote " << manifest_path.string() << "\n";
  return 0;
}

struct StackOptions {
  std::vector<std::string> shares;
  std::string out;
  std::string format = "p4";
};

int cmd_stack(const StackOptions& opt) {
  std::vector<BinaryImage> images;
  images.reserve(opt.shares.size());
  for (const std::string& path : opt.shares)
    images.push_back(load_pbm(read_file(path)).image);
  BinaryImage recon = stack(std::span<const BinaryImage>(images));
  PbmFormat format = opt.format == "p1" ? PbmFormat::P1 : PbmFormat::P4;
  write_file(opt.out, save_pbm(recon, format));
  std::cout << "wrote " << opt.out << "\n";
  return 0;
}

struct AnalyzeOptions {
  std::string recon;
  std::string secret;
};

int cmd_analyze(const AnalyzeOptions& opt) {
  BinaryImage recon = load_pbm(read_file(opt.recon)).image;
  BinaryImage secret = load_pbm(read_file(opt.secret)).image;
  TransmissionReport rep = transmission_report(recon, secret);
  std::cout << "white=" << fixed4(rep.white_region)
            << " black=" << fixed4(rep.black_region)
            << " contrast=" << fixed4(rep.contrast) << "\n";
  return 0;
}

struct AttackOptions {
  std::string secret;
  std::string shares_dir;
  std::string mask;
  std::uint32_t victim = 0;
  std::string out_dir = ".";
  std::string format = "p4";
  RandomChoice random;
};

// share_<index>.pbm files written by `split`
std::map<std::uint32_t, BinaryImage> collect_shares(const fs::path& dir) {
  std::map<std::uint32_t, BinaryImage> shares;
  if (!fs::is_directory(dir))
    throw std::runtime_error("not a directory: " + dir.string());
  std::regex pattern("share_([0-9]+)\\.pbm");
  for (const fs::directory_entry& entry : fs::directory_iterator(dir)) {
    std::smatch match;
    std::string name = entry.path().filename().string();
    if (!std::regex_match(name, match, pattern)) continue;
    std::uint32_t index = static_cast<std::uint32_t>(std::stoul(match[1]));
    shares.emplace(index, load_pbm(read_file(entry.path())).image);
  }
  return shares;
}

int cmd_attack(const AttackOptions& opt) {
  BinaryImage secret = load_pbm(read_file(opt.secret)).image;
  RegionMask mask = mask_from_image(load_pbm(read_file(opt.mask)).image);

  std::map<std::uint32_t, BinaryImage> found = collect_shares(opt.shares_dir);
  std::uint32_t n = static_cast<std::uint32_t>(found.size());
  if (n < 2)
    throw std::runtime_error("need at least 2 share files in " +
                             opt.shares_dir);
  std::vector<BinaryImage> ordered;
  for (std::uint32_t i = 1; i <= n; ++i) {
    auto it = found.find(i);
    if (it == found.end())
      throw std::runtime_error("missing share_" + std::to_string(i) +
                               ".pbm in " + opt.shares_dir);
    ordered.push_back(it->second);
  }
  if (opt.victim < 1 || opt.victim > n)
    throw std::runtime_error("victim index out of range (1.." +
                             std::to_string(n) + ")");

  ShareSet set{SchemeParams::two_of_n(n, secret.width(), secret.height()),
               std::move(ordered), std::nullopt};
  std::vector<std::uint32_t> colluders;
  for (std::uint32_t i = 1; i <= n; ++i)
    if (i != opt.victim) colluders.push_back(i);

  AttackScenario scenario{set, colluders, opt.victim, FakeImageSpec{mask}};
  RandomSource rng = opt.random.make();
  std::vector<BinaryImage> fakes =
      fake_grids_for_colluders(scenario, secret, rng);

  PbmFormat format = opt.format == "p1" ? PbmFormat::P1 : PbmFormat::P4;
  fs::create_directories(opt.out_dir);
  for (std::size_t i = 0; i < colluders.size(); ++i) {
    // on disk a fake grid looks exactly like a genuine share
    MetaList meta{{"scheme", "2n"},
                  {"index", std::to_string(colluders[i])},
                  {"n", std::to_string(n)},
                  {"k", "2"}};
    fs::path path = fs::path(opt.out_dir) /
                    ("fake_share_" + std::to_string(colluders[i]) + ".pbm");
    write_file(path, save_pbm(fakes[i], format, meta));
    std::cout << "wrote " << path.string() << "\n";
  }

  if (mask.count_selected() == 0) {
    std::cout << "no alteration\n";
    return 0;
  }

  // what the victim would see stacking each fake grid with their share
  RegionMask unaltered_white(secret.width(), secret.height());
  RegionMask black_region(secret.width(), secret.height());
  for (std::uint32_t r = 0; r < secret.height(); ++r)
    for (std::uint32_t c = 0; c < secret.width(); ++c) {
      if (secret.get(r, c) == 0 && !mask.get(r, c))
        unaltered_white.set(r, c, true);
      if (secret.get(r, c) == 1) black_region.set(r, c, true);
    }
  for (std::size_t i = 0; i < colluders.size(); ++i) {
    BinaryImage victim_stack = stack({fakes[i], set.share(opt.victim)});
    std::string line = "colluder " + std::to_string(colluders[i]) +
                       ": altered=" +
                       fixed4(region_fraction_white(victim_stack, mask));
    if (unaltered_white.count_selected() > 0)
      line += " unaltered_white=" +
              fixed4(region_fraction_white(victim_stack, unaltered_white));
    if (black_region.count_selected() > 0)
      line += " black=" +
              fixed4(region_fraction_white(victim_stack, black_region));
    std::cout << line << "\n";
  }
  return 0;
}

struct SimulateOptions {
  std::string scenario;
  std::uint64_t seed = 1;
};

int cmd_simulate(const SimulateOptions& opt) {
  std::optional<ScenarioKind> kind = parse_scenario_kind(opt.scenario);
  if (!kind) {
    std::cerr << "error: unknown scenario '" << opt.scenario
              << "' (expected honest|attack|replay|forge)\n";
    return 2;
  }
  std::vector<Step> script = builtin_script(*kind);
  ScenarioResult result = run_scenario(script, opt.seed);
  for (const TranscriptEntry& entry : result.transcript)
    std::cout << entry.line << "\n";
  std::cout << result.final_line() << "\n";
  return result.final_verdict == expected_verdict(*kind) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"random-grid visual secret sharing with share authentication"};
  app.require_subcommand(1);

  SplitOptions split_opt;
  CLI::App* split = app.add_subcommand(
      "split", "split a secret image into n shares");
  split->add_option("input", split_opt.input, "PBM secret (or PGM, binarized)")
      ->required();
  split->add_option("--scheme", split_opt.scheme, "2n: any two shares reconstruct; nn: all n required")
      ->check(CLI::IsMember({"2n", "nn"}))
      ->required();
  split->add_option("-n,--shares", split_opt.n, "number of shares")
      ->check(CLI::Range(2u, 64u))
      ->required();
  split->add_option("--out-dir", split_opt.out_dir, "output directory")
      ->capture_default_str();
  split->add_option("--format", split_opt.format, "share file format")
      ->check(CLI::IsMember({"p1", "p4"}))
      ->capture_default_str();
  split->add_option("--threshold", split_opt.threshold,
                    "binarization threshold for PGM input")
      ->check(CLI::Range(0, 255))
      ->capture_default_str();
  add_random_flags(split, split_opt.random);

  StackOptions stack_opt;
  CLI::App* stackc = app.add_subcommand(
      "stack", "superimpose two or more shares");
  stackc->add_option("shares", stack_opt.shares, "share files (at least 2)")
      ->expected(2, -1)
      ->required();
  stackc->add_option("-o,--out", stack_opt.out, "output PBM path")
      ->required();
  stackc->add_option("--format", stack_opt.format, "output format")
      ->check(CLI::IsMember({"p1", "p4"}))
      ->capture_default_str();

  AnalyzeOptions analyze_opt;
  CLI::App* analyze = app.add_subcommand(
      "analyze", "transmission report of a reconstruction");
  analyze->add_option("recon", analyze_opt.recon, "reconstruction PBM")
      ->required();
  analyze->add_option("secret", analyze_opt.secret, "original secret PBM")
      ->required();

  AttackOptions attack_opt;
  CLI::App* attack = app.add_subcommand(
      "attack", "craft fake grids from colluding shares");
  attack->add_option("--secret", attack_opt.secret, "original secret PBM")
      ->required();
  attack->add_option("--shares-dir", attack_opt.shares_dir,
                     "directory with share_<i>.pbm files")
      ->required();
  attack->add_option("--mask", attack_opt.mask,
                     "PBM mask; black pixels mark white->black alterations")
      ->required();
  attack->add_option("--victim", attack_opt.victim,
                     "share index of the victim (1-based)")
      ->required();
  attack->add_option("--out-dir", attack_opt.out_dir, "output directory")
      ->capture_default_str();
  attack->add_option("--format", attack_opt.format, "fake share format")
      ->check(CLI::IsMember({"p1", "p4"}))
      ->capture_default_str();
  add_random_flags(attack, attack_opt.random);

  SimulateOptions sim_opt;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "run a built-in protocol scenario");
  simulate->add_option("scenario", sim_opt.scenario,
                       "honest|attack|replay|forge")
      ->required();
  simulate->add_option("--seed", sim_opt.seed, "scenario seed")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (split->parsed()) return cmd_split(split_opt);
    if (stackc->parsed()) return cmd_stack(stack_opt);
    if (analyze->parsed()) return cmd_analyze(analyze_opt);
    if (attack->parsed()) return cmd_attack(attack_opt);
    if (simulate->parsed()) return cmd_simulate(sim_opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
