#pragma once

#include <string_view>

namespace cine::support {

/// The answering instructions every survey prompt must end with, copied by hand
/// from the published survey-emulation prompt.
inline constexpr std::string_view kExpectedStepsBlock =
    "As you answer, I want you to take the following steps:\n"
    "Step 1) Describe in a few sentences the kind of person that would choose each of the response options. "
    "(\"Option Interpretation\")\n"
    "Step 2) For each response options, reason about why the person might answer with the particular option. "
    "(\"Option Choice\")\n"
    "Step 3) Write a few sentences reasoning on which of the option best predicts the person's response "
    "(\"Reasoning\")\n"
    "Step 4) Predict how the person will actually respond in the survey. Predict based on the expert observation "
    "notes and your thoughts, but ultimately, DON'T over think it. Use your system 1 (fast, intuitive) thinking. "
    "(\"Response\")\n";

}  // namespace cine::support
