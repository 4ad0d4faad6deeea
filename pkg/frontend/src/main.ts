/** Browser entry point: wire the app to the page against the same origin. */

import { ApiClient } from "./api.js";
import { mount } from "./dom.js";
import { App } from "./state.js";

const app = new App(new ApiClient(""), { top_k: 8 });
mount(document.getElementById("app") as HTMLElement, app);
