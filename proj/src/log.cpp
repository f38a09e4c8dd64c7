/*
 * Copyright 2026 The cxrprompt Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cxrprompt/log.hpp"

#include <cstdlib>

#include <spdlog/sinks/stdout_sinks.h>

namespace cxrprompt {

std::shared_ptr<spdlog::logger> logger() {
  static const std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_logger_mt("cxrprompt");
    l->set_pattern("%Y-%m-%dT%H:%M:%S.%e level=%l %v");
    if (const char* level = std::getenv("CXRPROMPT_LOG")) {
      l->set_level(spdlog::level::from_str(level));
    } else {
      l->set_level(spdlog::level::info);
    }
    return l;
  }();
  return instance;
}

}  // namespace cxrprompt
