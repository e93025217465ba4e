#pragma once

// swreg <subcommand> [flags]
//
//   gen-data     --config phantom.json --out DIR [--seed N]
//   train        --config train.json --data DIR --out DIR [--seed N]
//   evaluate     --ckpt FILE --data DIR --out DIR [--model student|teacher] [--subset test|train]
//   atlas        --ckpt FILE --data DIR --out DIR [--model teacher|student] [--subset all|train|test]
//                [--max-iters N] [--tol T]
//   diversity    --atlas DIR --data DIR --out DIR [--fraction F]
//   check        [--suite all|identity|oracle|gradient] [--seed N] [--out DIR]
//   render-slice --input FILE --out FILE.pgm [--z K] [--channel C]
//
// Exit codes: 0 success, 1 failed run or failed check, 2 usage or config
// error, 3 file I/O error. SWREG_THREADS caps the worker count.

#include <string>
#include <vector>

namespace swreg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;

int run(int argc, char** argv);
/// Arguments without the program name.
int run(const std::vector<std::string>& args);

}  // namespace swreg::cli
