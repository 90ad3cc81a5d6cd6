/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace rangeleak {

struct CapacityError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ContractViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown when the response-time histogram has no usable valley between modes.
struct ClassifierError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when no probed prefix length stands out above the baseline FPR.
struct DetectionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rangeleak
