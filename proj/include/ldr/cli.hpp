#pragma once

namespace ldr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitConfig = 2;

/// Entry point of the `ldr` tool. Returns 0 on success, 1 when a check fails, 2 on
/// configuration or usage errors.
int cli_main(int argc, char** argv);

}  // namespace ldr
