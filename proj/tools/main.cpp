#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "pipeline.hpp"
#include "sgan/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"harmonic-moment pipeline: encode meshes, train the band cascade, sample and "
               "score point clouds"};
  app.require_subcommand(1);

  std::string input, out, format = "xyz", config, generated, reference, report;
  int bandlimit = 16, count = 1;
  std::uint64_t seed = 0;
  bool has_seed = false, has_bandlimit = false, resume = false;
  auto seed_opt = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "random stream for reproducible output")
        ->each([&](const std::string&) { has_seed = true; });
  };

  auto* encode = app.add_subcommand("encode", "mesh directory to harmonic moment files");
  encode->add_option("input", input, "directory of .obj / .off meshes")->required();
  encode->add_option("--bandlimit", bandlimit, "maximum harmonic degree")->capture_default_str();
  encode->add_option("--out", out, "output directory")->required();
  seed_opt(encode);

  auto* decode = app.add_subcommand("decode", "moment files to point clouds");
  decode->add_option("input", input, ".smv file or directory")->required();
  decode->add_option("--out", out, "output directory")->required();
  decode->add_option("--format", format, "cloud format")
      ->check(CLI::IsMember({"ply", "xyz"}))
      ->capture_default_str();
  seed_opt(decode);

  auto* train = app.add_subcommand("train", "run the full training schedule");
  train->add_option("--config", config, "key-value config file");
  train->add_option("--data", input, "directory of .smv training shapes");
  train->add_option("--out", out, "checkpoint directory");
  train->add_option("--bandlimit", bandlimit, "override the config bandlimit")
      ->each([&](const std::string&) { has_bandlimit = true; });
  train->add_flag("--resume", resume, "continue from the checkpoint progress marker");
  seed_opt(train);

  auto* generate = app.add_subcommand("generate", "sample shapes from a checkpoint");
  generate->add_option("checkpoint", input, "checkpoint directory")->required();
  generate->add_option("--count", count, "number of samples")->capture_default_str();
  generate->add_option("--out", out, "output directory")->required();
  generate->add_option("--format", format, "cloud format")
      ->check(CLI::IsMember({"ply", "xyz"}))
      ->capture_default_str();
  seed_opt(generate);

  auto* eval = app.add_subcommand("eval", "score generated clouds against a reference set");
  eval->add_option("generated", generated, "directory of generated clouds")->required();
  eval->add_option("reference", reference, "directory of reference clouds")->required();
  eval->add_option("--out", report, "report file");
  seed_opt(eval);

  auto* info = app.add_subcommand("info", "describe a moment file, mesh, cloud, or checkpoint");
  info->add_option("input", input, "path to describe")->required();

  try {
    app.parse(argc, argv);
    if (*encode) {
      sgan::cmd_encode(input, bandlimit, out, std::cout);
    } else if (*decode) {
      sgan::cmd_decode(input, out, format, std::cout);
    } else if (*train) {
      sgan::TrainOptions opt;
      opt.config_path = config;
      opt.data_dir = input;
      opt.out_dir = out;
      opt.resume = resume;
      opt.has_seed = has_seed;
      opt.seed = seed;
      opt.has_bandlimit = has_bandlimit;
      opt.bandlimit = bandlimit;
      sgan::cmd_train(opt, std::cout);
    } else if (*generate) {
      sgan::cmd_generate(input, count, seed, out, format, std::cout);
    } else if (*eval) {
      sgan::cmd_eval(generated, reference, report, std::cout);
    } else if (*info) {
      sgan::cmd_info(input, std::cout);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sgan::ConfigError::exit_code;
  } catch (const sgan::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return sgan::ConfigError::exit_code;
  } catch (const sgan::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return sgan::DataError::exit_code;
  } catch (const sgan::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return sgan::NumericalError::exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
