import { ReviewApi } from "./api";
import { ReviewApp } from "./app";
import { render } from "./ui";

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app element");

const app = new ReviewApp(new ReviewApi(""), () => render(app, root));
void app.load();
