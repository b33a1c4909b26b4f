/*
   Copyright 2026 The bifurk Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include "bifurk/error.hpp"
#include "bifurk/random.hpp"
#include "bifurk/treekit.hpp"
#include "bifurk/kernel.hpp"
#include "bifurk/bar.hpp"
#include "bifurk/empirics.hpp"
#include "bifurk/inference.hpp"
#include "bifurk/stats.hpp"
#include "bifurk/hypotest.hpp"
#include "bifurk/experiments.hpp"
#include "bifurk/io.hpp"
#include "bifurk/cli.hpp"
