/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#pragma once

#include <string_view>

// Shipped data files from data/, compiled into the library.
namespace tad::builtin {

std::string_view filter_default_json();
std::string_view confusables_tsv();
std::string_view swear_lexicon();
std::string_view second_person_lexicon();
std::string_view adverb_lexicon();
std::string_view sentiment_lexicon();

}  // namespace tad::builtin
